#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "blocks/errors.hpp"
#include "blocks/pipeline.hpp"
#include "oracles.hpp"

using namespace bw;
using namespace bw::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("blocks_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Relative path -> bytes for every regular file under root.
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

const std::vector<Box> kBoxes = {{Vec3(-0.6, -0.3, 2.5), Vec3(-0.1, 0.3, 3.0)},
                                 {Vec3(0.1, -0.4, 2.0), Vec3(0.5, 0.1, 2.6)}};

// Scene-based manifest over a 24x24 two-box scene and a 48x48 random image.
// The default 9 px dilation would mask the whole view at this size, and the
// match radius is raised to the pixel pitch at depth 2.5 (about 0.1).
PipelineManifest scene_manifest(const fs::path& dir, const Json& edits) {
  std::mt19937_64 rng(17);
  write_png(dir / "source.png", random_image(rng, 48, 48));
  write_scene(dir / "scene.json", box_scene(kBoxes, square_camera(24)));
  write_json(dir / "edits.json", edits);
  PipelineManifest m;
  m.source_image = dir / "source.png";
  m.scene = dir / "scene.json";
  m.edits = dir / "edits.json";
  m.output_dir = dir / "out";
  m.dilate_px = 2;
  m.max_distance = 0.1;
  return m;
}

Json translate_edit() {
  return parse_json(R"({"edits": [{"primitive_id": 1, "translate": [0.1, 0.0, 0.0]}],
                        "camera_delta": {"R": [1, 0, 0, 0, 1, 0, 0, 0, 1],
                                         "t": [0.05, 0.0, 0.0]}})");
}

}  // namespace

TEST(Pipeline, IdentityEditReproducesSource) {
  const fs::path dir = scratch_dir("identity");
  const PipelineManifest m = scene_manifest(dir, Json::array());
  const PipelineResult r = run_pipeline(m);
  const Image src = read_png(m.source_image);
  ASSERT_TRUE(r.hint.hint.same_shape(src));
  int kept = 0;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (r.hint.mask_full.at(x, y) != 1.0f) continue;
      ++kept;
      for (int c = 0; c < 3; ++c) ASSERT_EQ(r.hint.hint.at(x, y, c), src.at(x, y, c));
    }
  }
  EXPECT_GT(kept, 0);
  EXPECT_EQ(r.geometry_report.at("absrel").get<double>(), 0.0);
  EXPECT_EQ(r.geometry_report.at("schema_version"), kSchemaVersion);
  fs::remove_all(dir);
}

TEST(Pipeline, PersistsEveryStage) {
  const fs::path dir = scratch_dir("stages");
  const PipelineResult r = run_pipeline(scene_manifest(dir, translate_edit()));
  EXPECT_EQ(r.run_dir.filename().string(), r.input_hash);
  EXPECT_EQ(r.input_hash.size(), 16u);
  for (const char* f : {"parameters.json", "inputs/source.png", "inputs/scene.json",
                        "inputs/edits.json", "scene/scene.json", "edit/scene.json",
                        "edit/edits.json", "render/src/depth.pfm", "render/dst/convex.cvxm",
                        "correspond/forward/coords.pfm", "eval/geometry.json"}) {
    EXPECT_TRUE(fs::is_regular_file(r.run_dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(r.run_dir / "correspond" / "reverse"));
  EXPECT_FALSE(r.texture_report);
  fs::remove_all(dir);
}

TEST(Pipeline, RerunIsBitIdentical) {
  const fs::path dir = scratch_dir("determinism");
  PipelineManifest m = scene_manifest(dir, translate_edit());
  m.output_dir = dir / "a";
  const PipelineResult a = run_pipeline(m);
  m.output_dir = dir / "b";
  const PipelineResult b = run_pipeline(m);
  EXPECT_EQ(a.input_hash, b.input_hash);
  const auto ta = tree_bytes(a.run_dir);
  EXPECT_GT(ta.size(), 10u);
  EXPECT_TRUE(ta == tree_bytes(b.run_dir));
  fs::remove_all(dir);
}

TEST(Pipeline, HashTracksInputsAndParameters) {
  const fs::path dir = scratch_dir("hash");
  PipelineManifest m = scene_manifest(dir, translate_edit());
  const std::string h = manifest_hash(m);
  m.tau = 0.02;
  EXPECT_NE(manifest_hash(m), h);
  m.tau = kDefaultTau;
  EXPECT_EQ(manifest_hash(m), h);
  write_json(m.edits, Json::array());
  EXPECT_NE(manifest_hash(m), h);
  fs::remove_all(dir);
}

TEST(Pipeline, MissingDepthFailsBeforeCompute) {
  const fs::path dir = scratch_dir("missing");
  PipelineManifest m = scene_manifest(dir, Json::array());
  m.scene.reset();
  m.depth = dir / "absent.pfm";
  m.camera = dir / "camera.json";
  write_json(*m.camera, camera_to_json(square_camera(24)));
  EXPECT_THROW(run_pipeline(m), ValidationError);
  EXPECT_FALSE(fs::exists(m.output_dir));
  fs::remove_all(dir);
}

TEST(Pipeline, ValidationRejectsBadManifests) {
  const fs::path dir = scratch_dir("validate");
  const PipelineManifest good = scene_manifest(dir, Json::array());
  EXPECT_NO_THROW(validate_manifest(good));
  PipelineManifest both = good;
  both.depth = dir / "scene.json";
  EXPECT_THROW(validate_manifest(both), ValidationError);
  PipelineManifest tau = good;
  tau.tau = 1.5;
  EXPECT_THROW(validate_manifest(tau), ValidationError);
  PipelineManifest bad_edit = good;
  write_json(dir / "bad_edits.json", parse_json(R"([{"primitive_id": 9, "scale": 2}])"));
  bad_edit.edits = dir / "bad_edits.json";
  EXPECT_THROW(validate_manifest(bad_edit), ValidationError);
  PipelineManifest odd_size = good;
  std::mt19937_64 rng(1);
  write_png(dir / "odd.png", random_image(rng, 25, 24));
  odd_size.source_image = dir / "odd.png";
  EXPECT_THROW(validate_manifest(odd_size), ValidationError);
  EXPECT_FALSE(fs::exists(good.output_dir));
  fs::remove_all(dir);
}

TEST(Pipeline, ManifestJsonRoundTripAndRelativePaths) {
  const fs::path dir = scratch_dir("manifest");
  PipelineManifest m = scene_manifest(dir, Json::array());
  m.k = 3;
  m.dilate_px = 4;
  const PipelineManifest back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
  const Json rel = parse_json(R"({"source_image": "source.png", "scene": "scene.json",
                                  "edits": "edits.json", "output_dir": "out", "seed": 3})");
  const PipelineManifest r = manifest_from_json(rel, dir);
  EXPECT_EQ(r.source_image, dir / "source.png");
  EXPECT_EQ(r.seed, 3u);
  EXPECT_NO_THROW(validate_manifest(r));
  EXPECT_THROW(manifest_from_json(parse_json(R"({"source_image": "a.png"})")), ValidationError);
  fs::remove_all(dir);
}

TEST(Pipeline, FitsDepthAndNamesFailingStage) {
  const fs::path dir = scratch_dir("fit");
  const CameraIntrinsics cam = square_camera(24);
  std::mt19937_64 rng(2);
  write_png(dir / "source.png", random_image(rng, 24, 24));
  write_pfm(dir / "depth.pfm", box_depth(kBoxes, cam));
  write_json(dir / "camera.json", camera_to_json(cam));
  write_json(dir / "edits.json", parse_json(R"([{"primitive_id": 0, "rotate_y": 0.2}])"));
  PipelineManifest m;
  m.source_image = dir / "source.png";
  m.depth = dir / "depth.pfm";
  m.camera = dir / "camera.json";
  m.edits = dir / "edits.json";
  m.output_dir = dir / "out";
  m.k = 2;
  m.steps = 40;
  m.dilate_px = 2;
  const PipelineResult r = run_pipeline(m);
  const Json report = read_json(r.run_dir / "scene" / "fit_report.json");
  EXPECT_EQ(report.at("k"), 2);
  EXPECT_FALSE(report.contains("wall_time"));
  EXPECT_EQ(read_scene(r.run_dir / "scene" / "scene.json").primitives.size(), 2u);

  // Edits are checked against the fitted scene only once it exists.
  write_json(m.edits, parse_json(R"([{"primitive_id": 5, "scale": 2}])"));
  try {
    run_pipeline(m);
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("stage edit"), std::string::npos) << e.what();
  }
  const fs::path failed = m.output_dir / manifest_hash(m);
  EXPECT_TRUE(fs::is_regular_file(failed / "scene" / "scene.json"));
  EXPECT_FALSE(fs::exists(failed / "edit" / "scene.json"));
  fs::remove_all(dir);
}

TEST(Pipeline, ScoresGeneratedImage) {
  const fs::path dir = scratch_dir("generated");
  PipelineManifest m = scene_manifest(dir, Json::array());
  m.generated_image = m.source_image;
  const PipelineResult r = run_pipeline(m);
  ASSERT_TRUE(r.texture_report);
  EXPECT_EQ(r.texture_report->at("psnr").get<double>(), 99.0);
  EXPECT_NEAR(r.texture_report->at("ssim").get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(fs::is_regular_file(r.run_dir / "eval" / "texture.json"));
  fs::remove_all(dir);
}
