#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "blocks/correspond.hpp"
#include "blocks/fit.hpp"
#include "blocks/hint.hpp"
#include "blocks/io.hpp"

namespace bw {

/// Geometry-side products of one edit: both scenes, both renders and the
/// dst -> src correspondence.
struct EditProducts {
  Scene source;
  Scene edited;
  TransformMap transforms;
  RenderProduct src_render;
  RenderProduct dst_render;
  CorrespondenceResult corr;
};

/// Applies the script, renders both views and runs correspond_edit.
EditProducts run_edit(const Scene& source, const EditScript& script,
                      double max_distance = kDefaultMaxDistance,
                      const RenderOptions& render = {});

/// Hint for img (source view) through an existing correspondence; misses of
/// the edited view are skipped.
HintPackage hint_from_products(const Image& img, const EditProducts& products,
                               const HintOptions& opts = {});

/// Fits a scene to a depth map: normalize_depth, fit, and a scene whose
/// primitives live in the normalized depth units.
FitResult fit_depth(const DepthMap& depth, const CameraIntrinsics& cam,
                    const FitConfig& cfg);

struct PipelineManifest {
  std::filesystem::path source_image;
  /// Either scene, or depth + camera to fit one.
  std::optional<std::filesystem::path> scene;
  std::optional<std::filesystem::path> depth;
  std::optional<std::filesystem::path> camera;
  std::filesystem::path edits;
  std::filesystem::path output_dir;
  /// Image synthesized for the edited view, scored by cycle reprojection.
  std::optional<std::filesystem::path> generated_image;
  /// Depth estimated from the generated image, scored against the edited
  /// render. Without it the edited render is scored against the source render.
  std::optional<std::filesystem::path> generated_depth;

  int k = 12;
  int steps = 2000;
  std::uint64_t seed = 7;
  double max_distance = kDefaultMaxDistance;
  double tau = kDefaultTau;
  int dilate_px = kDefaultDilatePx;
  double skip_below = kHintSkipThreshold;
};

/// Relative paths resolve against base_dir.
PipelineManifest manifest_from_json(const Json& j,
                                    const std::filesystem::path& base_dir = {});
Json manifest_to_json(const PipelineManifest& m);

/// Throws ValidationError unless every referenced input exists and parses and
/// the parameters are in range. Runs no computation.
void validate_manifest(const PipelineManifest& m);

struct PipelineResult {
  /// output_dir / <16 hex digits of the input hash>.
  std::filesystem::path run_dir;
  std::string input_hash;
  HintPackage hint;
  Json geometry_report;
  std::optional<Json> texture_report;
};

/// FNV-1a 64 over the manifest parameters and the bytes of every input.
std::string manifest_hash(const PipelineManifest& m);

/// Runs scene -> edit -> render -> correspond -> hint -> eval. Each stage
/// reads the previous stage's persisted artifacts. A failing stage throws the
/// original error type with the stage named in the message; artifacts of
/// completed stages remain on disk.
PipelineResult run_pipeline(const PipelineManifest& m);

}  // namespace bw
