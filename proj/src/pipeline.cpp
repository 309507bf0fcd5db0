#include "blocks/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cinttypes>
#include <cstdio>

#include "blocks/errors.hpp"
#include "blocks/metrics.hpp"

namespace bw {

namespace fs = std::filesystem;

EditProducts run_edit(const Scene& source, const EditScript& script,
                      double max_distance, const RenderOptions& render) {
  validate_scene(source);
  validate_edits(source, script);
  EditProducts out;
  out.source = source;
  out.transforms = collect_transforms(script);
  out.edited = apply_edits(source, out.transforms, script.camera_delta);
  out.src_render = render_scene(out.source, render);
  out.dst_render = render_scene(out.edited, render);
  out.corr = correspond_edit(out.source, out.transforms, out.src_render,
                             out.dst_render, max_distance);
  return out;
}

HintPackage hint_from_products(const Image& img, const EditProducts& products,
                               const HintOptions& opts) {
  return build_hint_package(img, products.corr, miss_mask(products.dst_render.convex_map),
                            opts);
}

FitResult fit_depth(const DepthMap& depth, const CameraIntrinsics& cam,
                    const FitConfig& cfg) {
  validate_camera(cam);
  if (depth.width() != cam.width || depth.height() != cam.height ||
      depth.channels() != 1) {
    throw ValidationError("depth map does not match the camera resolution");
  }
  const NormalizedDepth nd = normalize_depth(depth);
  return fit(nd.depth, cam, cfg);
}

// ---------------------------------------------------------------- manifest

namespace {

fs::path resolve(const Json& j, const char* key, const fs::path& base) {
  if (!j.at(key).is_string()) throw ValidationError(std::string(key) + " must be a path");
  const fs::path p = j.at(key).get<std::string>();
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::optional<fs::path> optional_path(const Json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(j, key, base);
}

void require_file(const fs::path& p, const char* role) {
  if (!fs::is_regular_file(p)) {
    throw ValidationError(std::string(role) + " not found: " + p.string());
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

Json parameters_json(const PipelineManifest& m) {
  return {{"k", m.k},
          {"steps", m.steps},
          {"seed", m.seed},
          {"max_distance", m.max_distance},
          {"tau", m.tau},
          {"dilate_px", m.dilate_px},
          {"skip_below", m.skip_below}};
}

// Input files in a fixed role order, for hashing and for the inputs/ copy.
std::vector<std::pair<std::string, fs::path>> input_files(const PipelineManifest& m) {
  std::vector<std::pair<std::string, fs::path>> files;
  files.emplace_back("source.png", m.source_image);
  if (m.scene) files.emplace_back("scene.json", *m.scene);
  if (m.depth) files.emplace_back("depth.pfm", *m.depth);
  if (m.camera) files.emplace_back("camera.json", *m.camera);
  files.emplace_back("edits.json", m.edits);
  if (m.generated_image) files.emplace_back("generated.png", *m.generated_image);
  if (m.generated_depth) files.emplace_back("generated_depth.pfm", *m.generated_depth);
  return files;
}

template <class F>
auto run_stage(const char* name, F&& body) {
  spdlog::debug("pipeline stage {}", name);
  try {
    return body();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("stage ") + name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

PipelineManifest manifest_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
  for (const char* key : {"source_image", "edits", "output_dir"}) {
    if (!j.contains(key)) throw ValidationError(std::string("manifest lacks ") + key);
  }
  PipelineManifest m;
  try {
    m.source_image = resolve(j, "source_image", base_dir);
    m.edits = resolve(j, "edits", base_dir);
    m.output_dir = resolve(j, "output_dir", base_dir);
    m.scene = optional_path(j, "scene", base_dir);
    m.depth = optional_path(j, "depth", base_dir);
    m.camera = optional_path(j, "camera", base_dir);
    m.generated_image = optional_path(j, "generated_image", base_dir);
    m.generated_depth = optional_path(j, "generated_depth", base_dir);
    m.k = j.value("k", m.k);
    m.steps = j.value("steps", m.steps);
    m.seed = j.value("seed", m.seed);
    m.max_distance = j.value("max_distance", m.max_distance);
    m.tau = j.value("tau", m.tau);
    m.dilate_px = j.value("dilate_px", m.dilate_px);
    m.skip_below = j.value("skip_below", m.skip_below);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return m;
}

Json manifest_to_json(const PipelineManifest& m) {
  Json j = parameters_json(m);
  j["version"] = kSchemaVersion;
  j["source_image"] = m.source_image.string();
  j["edits"] = m.edits.string();
  j["output_dir"] = m.output_dir.string();
  if (m.scene) j["scene"] = m.scene->string();
  if (m.depth) j["depth"] = m.depth->string();
  if (m.camera) j["camera"] = m.camera->string();
  if (m.generated_image) j["generated_image"] = m.generated_image->string();
  if (m.generated_depth) j["generated_depth"] = m.generated_depth->string();
  return j;
}

void validate_manifest(const PipelineManifest& m) {
  if (m.scene.has_value() == (m.depth.has_value() || m.camera.has_value())) {
    throw ValidationError("manifest needs either a scene or a depth map and camera");
  }
  if (!m.scene && !(m.depth && m.camera)) {
    throw ValidationError("fitting needs both a depth map and a camera");
  }
  if (m.output_dir.empty()) throw ValidationError("manifest lacks an output directory");
  for (const auto& [role, path] : input_files(m)) require_file(path, role.c_str());
  if (!(m.max_distance > 0.0)) throw ValidationError("max_distance must be positive");
  if (!(m.tau > 0.0 && m.tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  if (m.dilate_px < 0) throw ValidationError("dilate_px must be non-negative");
  if (!(m.skip_below >= 0.0 && m.skip_below <= 1.0)) {
    throw ValidationError("skip_below must lie in [0, 1]");
  }

  // Parse every input so malformed files fail before any compute.
  const FloatRaster img = read_png(m.source_image);
  CameraIntrinsics cam;
  Scene scene;
  if (m.scene) {
    scene = read_scene(*m.scene);
    cam = scene.camera;
  } else {
    cam = camera_from_json(read_json(*m.camera));
    const DepthMap depth = read_pfm(*m.depth);
    if (depth.channels() != 1 || depth.width() != cam.width || depth.height() != cam.height) {
      throw ValidationError("depth map does not match the camera resolution");
    }
    FitConfig cfg;
    cfg.k = m.k;
    cfg.steps = m.steps;
    cfg.seed = m.seed;
    validate_fit_config(cfg);
  }
  const EditScript script = edits_from_json(read_json(m.edits));
  if (m.scene) validate_edits(scene, script);
  if (img.width() % cam.width != 0 || img.height() % cam.height != 0) {
    throw ValidationError("source image resolution is not a multiple of the camera's");
  }
  if (m.generated_image) {
    const FloatRaster gen = read_png(*m.generated_image);
    if (!gen.same_shape(img)) throw ValidationError("generated image size differs from the source");
  }
  if (m.generated_depth) {
    const DepthMap gd = read_pfm(*m.generated_depth);
    if (gd.channels() != 1 || gd.width() != cam.width || gd.height() != cam.height) {
      throw ValidationError("generated depth does not match the camera resolution");
    }
  }
}

std::string manifest_hash(const PipelineManifest& m) {
  std::uint64_t h = fnv1a(parameters_json(m).dump());
  for (const auto& [role, path] : input_files(m)) {
    h = fnv1a(role, h);
    h = fnv1a(read_file(path), h);
  }
  return hex64(h);
}

PipelineResult run_pipeline(const PipelineManifest& m) {
  validate_manifest(m);
  PipelineResult result;
  result.input_hash = manifest_hash(m);
  result.run_dir = m.output_dir / result.input_hash;
  const fs::path dir = result.run_dir;
  const fs::path in = dir / "inputs";

  run_stage("inputs", [&] {
    fs::create_directories(in);
    for (const auto& [role, path] : input_files(m)) write_file(in / role, read_file(path));
    Json params = parameters_json(m);
    params["schema_version"] = kSchemaVersion;
    write_json(dir / "parameters.json", params);
    return 0;
  });

  run_stage("scene", [&] {
    Scene scene;
    if (m.scene) {
      scene = read_scene(in / "scene.json");
    } else {
      FitConfig cfg;
      cfg.k = m.k;
      cfg.steps = m.steps;
      cfg.seed = m.seed;
      const FitResult fitted = fit_depth(read_pfm(in / "depth.pfm"),
                                         camera_from_json(read_json(in / "camera.json")), cfg);
      if (fitted.report.diverged) throw NumericalError("fit diverged");
      scene = fitted.scene;
      // wall_time would break bit-identical reruns.
      write_json(dir / "scene" / "fit_report.json", fit_report_to_json(fitted.report, false));
    }
    write_scene(dir / "scene" / "scene.json", scene);
    return 0;
  });

  run_stage("edit", [&] {
    const Scene source = read_scene(dir / "scene" / "scene.json");
    const EditScript script = edits_from_json(read_json(in / "edits.json"));
    validate_edits(source, script);
    write_json(dir / "edit" / "edits.json", edits_to_json(script));
    write_scene(dir / "edit" / "scene.json",
                apply_edits(source, collect_transforms(script), script.camera_delta));
    return 0;
  });

  run_stage("render", [&] {
    write_render(dir / "render" / "src", render_scene(read_scene(dir / "scene" / "scene.json")));
    write_render(dir / "render" / "dst", render_scene(read_scene(dir / "edit" / "scene.json")));
    return 0;
  });

  run_stage("correspond", [&] {
    const Scene source = read_scene(dir / "scene" / "scene.json");
    const TransformMap transforms =
        collect_transforms(edits_from_json(read_json(dir / "edit" / "edits.json")));
    const RenderProduct src = read_render(dir / "render" / "src");
    const RenderProduct dst = read_render(dir / "render" / "dst");
    write_correspondence(dir / "correspond" / "forward",
                         correspond_edit(source, transforms, src, dst, m.max_distance));
    if (m.generated_image) {
      write_correspondence(dir / "correspond" / "reverse",
                           correspond_reverse(source, transforms, src, dst, m.max_distance));
    }
    return 0;
  });

  result.hint = run_stage("hint", [&] {
    const FloatRaster img = read_png(in / "source.png");
    const CorrespondenceResult corr = read_correspondence(dir / "correspond" / "forward");
    const IdRaster dst_map = read_cvxm(dir / "render" / "dst" / "convex.cvxm");
    HintPackage pkg = build_hint_package(img, corr, miss_mask(dst_map),
                                         {m.tau, m.dilate_px, m.skip_below});
    write_hint_package(dir / "hint", pkg);
    return pkg;
  });

  result.geometry_report = run_stage("eval", [&] {
    const DepthMap pred = read_pfm(dir / "render" / "dst" / "depth.pfm");
    const DepthMap gt = m.generated_depth ? read_pfm(in / "generated_depth.pfm")
                                          : read_pfm(dir / "render" / "src" / "depth.pfm");
    const BinaryMask valid = depth_valid_mask(pred, gt);
    const DepthAlignment a = align_depth(pred, gt, valid);
    Json report = alignment_to_json(a, absrel(pred, gt, valid));
    write_json(dir / "eval" / "geometry.json", report);
    return report;
  });

  if (m.generated_image) {
    result.texture_report = run_stage("eval", [&] {
      const CorrespondenceResult rev = read_correspondence(dir / "correspond" / "reverse");
      const ConfidenceMask mask = process_mask(rev.confidence, m.tau, m.dilate_px);
      const TextureReport r = reprojection_report(read_png(in / "source.png"),
                                                  read_png(in / "generated.png"), rev, mask,
                                                  m.skip_below);
      Json report = texture_report_to_json(r);
      write_json(dir / "eval" / "texture.json", report);
      return report;
    });
  }
  return result;
}

}  // namespace bw
