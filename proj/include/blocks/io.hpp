#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "blocks/correspond.hpp"
#include "blocks/edit.hpp"
#include "blocks/fit.hpp"
#include "blocks/hint.hpp"
#include "blocks/metrics.hpp"
#include "blocks/raster.hpp"
#include "blocks/render.hpp"
#include "blocks/scene.hpp"

namespace bw {

using Json = nlohmann::json;

/// Written into every scene, edit and report document.
inline constexpr int kSchemaVersion = 1;

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// PFM: "Pf" (1 channel) or "PF" (3 channels), little-endian, scale -1,
/// rows stored bottom to top. Two-channel rasters are written as "PF" with a
/// zero third channel. Non-finite payloads and truncated data are rejected.
std::string encode_pfm(const FloatRaster& raster);
FloatRaster decode_pfm(std::string_view bytes);
FloatRaster read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const FloatRaster& raster);

/// 8-bit PNG. Values are clamped to [0, 1] and quantized as round(v * 255);
/// decoding yields 3 channels with v / 255 regardless of the stored format.
std::string encode_png(const FloatRaster& image);
FloatRaster decode_png(std::string_view bytes);
FloatRaster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const FloatRaster& image);

/// "CVXM", u16 width, u16 height (little-endian), then width * height int32
/// little-endian ids. A payload of any other length is rejected.
std::string encode_cvxm(const IdRaster& map);
IdRaster decode_cvxm(std::string_view bytes);
IdRaster read_cvxm(const std::filesystem::path& path);
void write_cvxm(const std::filesystem::path& path, const IdRaster& map);

Json camera_to_json(const CameraIntrinsics& cam);
CameraIntrinsics camera_from_json(const Json& j);
Json rigid_to_json(const RigidTransform& t);
RigidTransform rigid_from_json(const Json& j);

/// Non-unit plane normals are rescaled on load with a warning; the result is
/// validated.
Json scene_to_json(const Scene& scene);
Scene scene_from_json(const Json& j);
Scene read_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const Scene& scene);

/// Accepts a bare list of edits or {"edits": [...], "camera_delta": {R, t}}.
Json edits_to_json(const EditScript& script);
EditScript edits_from_json(const Json& j);

Json fit_report_to_json(const FitReport& report, bool include_wall_time = true);
Json alignment_to_json(const DepthAlignment& a, double absrel_value);
Json texture_report_to_json(const TextureReport& r);

/// Dumps with a trailing newline; parse errors become ValidationError.
std::string dump_json(const Json& j);
Json parse_json(std::string_view text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// A RenderProduct as depth.pfm, convex.cvxm and points.pfm in `dir`.
void write_render(const std::filesystem::path& dir, const RenderProduct& r);
RenderProduct read_render(const std::filesystem::path& dir);

/// coords.pfm (3-channel, third channel zero) and confidence.pfm in `dir`.
void write_correspondence(const std::filesystem::path& dir,
                          const CorrespondenceResult& c);
CorrespondenceResult read_correspondence(const std::filesystem::path& dir);

/// hint.png, inpainted.png, mask.pfm, mask_full.pfm in `dir`.
void write_hint_package(const std::filesystem::path& dir, const HintPackage& p);

/// Fixed 8-bit preview of a depth map (near bright, misses black) and of a
/// convex map (id -> fixed palette).
FloatRaster depth_preview(const DepthMap& depth);
FloatRaster convex_preview(const IdRaster& map);

}  // namespace bw
