#include "blocks/io.hpp"

#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "blocks/errors.hpp"

namespace bw {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "codecs assume a little-endian host");

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("short write to " + path.string());
}

// ---------------------------------------------------------------- PFM

std::string encode_pfm(const FloatRaster& raster) {
  const int ch = raster.channels();
  if (ch < 1 || ch > 3) throw ValidationError("PFM holds 1 to 3 channels");
  const int stored = ch == 1 ? 1 : 3;
  std::string out = (stored == 1 ? "Pf\n" : "PF\n") + std::to_string(raster.width()) +
                    " " + std::to_string(raster.height()) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + raster.pixel_count() * stored * sizeof(float));
  char* dst = out.data() + header;
  for (int y = raster.height() - 1; y >= 0; --y) {
    for (int x = 0; x < raster.width(); ++x) {
      for (int c = 0; c < stored; ++c) {
        const float v = c < ch ? raster.at(x, y, c) : 0.0f;
        std::memcpy(dst, &v, sizeof(float));
        dst += sizeof(float);
      }
    }
  }
  return out;
}

FloatRaster decode_pfm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ValidationError("truncated PFM header");
    return std::string(bytes.substr(start, pos - start));
  };
  const std::string magic = token();
  int ch = 0;
  if (magic == "Pf") ch = 1;
  else if (magic == "PF") ch = 3;
  else throw ValidationError("not a PFM file");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::logic_error&) {
    throw ValidationError("malformed PFM header");
  }
  if (w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale)) {
    throw ValidationError("malformed PFM header");
  }
  // Exactly one whitespace byte separates the header from the payload.
  if (pos >= bytes.size()) throw ValidationError("truncated PFM header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * ch * sizeof(float);
  if (bytes.size() - pos != need) throw ValidationError("PFM payload size mismatch");
  const bool big = scale > 0.0;
  FloatRaster out(w, h, ch);
  const char* src = bytes.data() + pos;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        std::uint32_t bits;
        std::memcpy(&bits, src, sizeof bits);
        src += sizeof bits;
        if (big) bits = __builtin_bswap32(bits);
        const float v = std::bit_cast<float>(bits);
        if (!std::isfinite(v)) throw ValidationError("non-finite PFM payload");
        out.at(x, y, c) = v;
      }
    }
  }
  return out;
}

FloatRaster read_pfm(const fs::path& path) { return decode_pfm(read_file(path)); }
void write_pfm(const fs::path& path, const FloatRaster& raster) {
  write_file(path, encode_pfm(raster));
}

// ---------------------------------------------------------------- PNG

namespace {

struct PngReadCursor {
  std::string_view bytes;
  std::size_t pos = 0;
};

void png_warning_fn(png_structp, png_const_charp) {}
// Failures surface as ValidationError; libpng's default handler would print.
[[noreturn]] void png_error_fn(png_structp png, png_const_charp) { png_longjmp(png, 1); }

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->bytes.size() - cur->pos < n) png_error(png, "truncated PNG");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void png_flush_fn(png_structp) {}

std::uint8_t quantize(float v) {
  if (!std::isfinite(v)) throw ValidationError("non-finite image value");
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// libpng reports errors by longjmp; these frames own no C++ objects, so the
// jump skips no destructors. Buffers live in the caller.
bool png_write_raw(const std::uint8_t* pixels, int w, int h, int ch,
                   std::string* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, w, h, 8, ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, pixels + static_cast<std::size_t>(w) * ch * y);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

bool png_read_raw(PngReadCursor* cur, std::vector<std::uint8_t>* pixels,
                  std::vector<png_bytep>* rows, int* w, int* h) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, cur, png_read_fn);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  *w = static_cast<int>(png_get_image_width(png, info));
  *h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) png_error(png, "unsupported PNG layout");
  pixels->resize(static_cast<std::size_t>(*w) * *h * 3);
  rows->resize(static_cast<std::size_t>(*h));
  for (int y = 0; y < *h; ++y) {
    (*rows)[y] = pixels->data() + static_cast<std::size_t>(*w) * 3 * y;
  }
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

std::string encode_png(const FloatRaster& image) {
  const int ch = image.channels();
  if (ch != 1 && ch != 3) throw ValidationError("PNG export needs 1 or 3 channels");
  if (image.empty()) throw ValidationError("cannot encode an empty image");
  std::vector<std::uint8_t> pixels(image.values().size());
  std::transform(image.values().begin(), image.values().end(), pixels.begin(), quantize);
  std::string out;
  if (!png_write_raw(pixels.data(), image.width(), image.height(), ch, &out)) {
    throw ValidationError("PNG encoding failed");
  }
  return out;
}

FloatRaster decode_png(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8)) {
    throw ValidationError("not a PNG file");
  }
  PngReadCursor cur{bytes, 0};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  int w = 0, h = 0;
  if (!png_read_raw(&cur, &pixels, &rows, &w, &h)) throw ValidationError("malformed PNG");
  FloatRaster out(w, h, 3);
  std::transform(pixels.begin(), pixels.end(), out.values().begin(),
                 [](std::uint8_t v) { return v / 255.0f; });
  return out;
}

FloatRaster read_png(const fs::path& path) { return decode_png(read_file(path)); }
void write_png(const fs::path& path, const FloatRaster& image) {
  write_file(path, encode_png(image));
}

// ---------------------------------------------------------------- CVXM

std::string encode_cvxm(const IdRaster& map) {
  if (map.width() > 0xFFFF || map.height() > 0xFFFF) {
    throw ValidationError("CVXM dimensions exceed 65535");
  }
  std::string out = "CVXM";
  const std::uint16_t w = static_cast<std::uint16_t>(map.width());
  const std::uint16_t h = static_cast<std::uint16_t>(map.height());
  out.append(reinterpret_cast<const char*>(&w), 2);
  out.append(reinterpret_cast<const char*>(&h), 2);
  out.append(reinterpret_cast<const char*>(map.values().data()),
             map.values().size() * sizeof(std::int32_t));
  return out;
}

IdRaster decode_cvxm(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != "CVXM") {
    throw ValidationError("not a CVXM file");
  }
  std::uint16_t w, h;
  std::memcpy(&w, bytes.data() + 4, 2);
  std::memcpy(&h, bytes.data() + 6, 2);
  const std::size_t need = static_cast<std::size_t>(w) * h * sizeof(std::int32_t);
  if (bytes.size() - 8 != need) throw ValidationError("CVXM payload size mismatch");
  IdRaster out(w, h, 1);
  std::memcpy(out.values().data(), bytes.data() + 8, need);
  return out;
}

IdRaster read_cvxm(const fs::path& path) { return decode_cvxm(read_file(path)); }
void write_cvxm(const fs::path& path, const IdRaster& map) {
  write_file(path, encode_cvxm(map));
}

// ---------------------------------------------------------------- JSON

namespace {

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite");
  return v;
}

Vec3 vec_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ValidationError(std::string(what) + " must be a 3-element array");
  }
  return {number(j[0], what), number(j[1], what), number(j[2], what)};
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

int integer(const Json& j, const char* what) {
  if (!j.is_number_integer()) throw ValidationError(std::string(what) + " must be an integer");
  return j.get<int>();
}

}  // namespace

Json camera_to_json(const CameraIntrinsics& cam) {
  return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
          {"width", cam.width}, {"height", cam.height}};
}

CameraIntrinsics camera_from_json(const Json& j) {
  CameraIntrinsics cam;
  cam.fx = number(field(j, "fx"), "fx");
  cam.fy = number(field(j, "fy"), "fy");
  cam.cx = number(field(j, "cx"), "cx");
  cam.cy = number(field(j, "cy"), "cy");
  cam.width = integer(field(j, "width"), "width");
  cam.height = integer(field(j, "height"), "height");
  validate_camera(cam);
  return cam;
}

Json rigid_to_json(const RigidTransform& t) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation(i, k));
  }
  return {{"R", r}, {"t", vec_to_json(t.translation)}};
}

// R is 9 numbers in row-major order; three rows of three are also accepted.
RigidTransform rigid_from_json(const Json& j) {
  RigidTransform t;
  const Json& r = field(j, "R");
  if (r.is_array() && r.size() == 9) {
    for (int i = 0; i < 9; ++i) t.rotation(i / 3, i % 3) = number(r[i], "R");
  } else if (r.is_array() && r.size() == 3) {
    for (int i = 0; i < 3; ++i) t.rotation.row(i) = vec_from_json(r[i], "R row").transpose();
  } else {
    throw ValidationError("R must hold 9 numbers in row-major order");
  }
  t.translation = vec_from_json(field(j, "t"), "t");
  validate_rigid(t);
  return t;
}

Json scene_to_json(const Scene& scene) {
  Json prims = Json::array();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const ConvexPrimitive& p = scene.primitives[i];
    Json planes = Json::array();
    for (const HalfPlane& h : p.planes) {
      planes.push_back({h.normal.x(), h.normal.y(), h.normal.z(), h.offset});
    }
    prims.push_back({{"id", static_cast<int>(i)},
                     {"live", p.live},
                     {"delta", p.delta},
                     {"sigma", p.sigma},
                     {"center", vec_to_json(p.center)},
                     {"planes", planes}});
  }
  return {{"version", kSchemaVersion},
          {"camera", camera_to_json(scene.camera)},
          {"pose", rigid_to_json(scene.pose)},
          {"primitives", prims}};
}

Scene scene_from_json(const Json& j) {
  if (integer(field(j, "version"), "version") != kSchemaVersion) {
    throw ValidationError("unsupported scene version");
  }
  Scene scene;
  scene.camera = camera_from_json(field(j, "camera"));
  scene.pose = rigid_from_json(field(j, "pose"));
  const Json& prims = field(j, "primitives");
  if (!prims.is_array()) throw ValidationError("primitives must be an array");
  std::mt19937_64 rng(0);
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const Json& pj = prims[i];
    if (pj.contains("id") && integer(pj.at("id"), "id") != static_cast<int>(i)) {
      throw ValidationError("primitive ids must equal their array index");
    }
    ConvexPrimitive p;
    p.live = pj.value("live", true);
    p.delta = number(field(pj, "delta"), "delta");
    p.sigma = number(field(pj, "sigma"), "sigma");
    p.center = vec_from_json(field(pj, "center"), "center");
    const Json& planes = field(pj, "planes");
    if (!planes.is_array()) throw ValidationError("planes must be an array");
    for (const Json& hj : planes) {
      if (!hj.is_array() || hj.size() != 4) {
        throw ValidationError("a plane is [nx, ny, nz, d]");
      }
      HalfPlane h;
      h.normal = {number(hj[0], "plane"), number(hj[1], "plane"), number(hj[2], "plane")};
      h.offset = number(hj[3], "plane");
      if (!(h.normal.norm() > 1e-12)) {
        throw ValidationError("primitive " + std::to_string(i) + " has a zero plane normal");
      }
      p.planes.push_back(h);
    }
    if (normalize_planes(p, rng)) {
      spdlog::warn("primitive {}: non-unit plane normals rescaled on load", i);
    }
    scene.primitives.push_back(std::move(p));
  }
  validate_scene(scene);
  return scene;
}

Scene read_scene(const fs::path& path) { return scene_from_json(read_json(path)); }
void write_scene(const fs::path& path, const Scene& scene) {
  write_json(path, scene_to_json(scene));
}

Json edits_to_json(const EditScript& script) {
  Json edits = Json::array();
  for (const PrimitiveTransform& t : script.edits) {
    Json e = {{"primitive_id", t.primitive_id}};
    if (t.translation) e["translate"] = vec_to_json(*t.translation);
    if (t.rotation_y) e["rotate_y"] = *t.rotation_y;
    if (t.scale) e["scale"] = *t.scale;
    if (t.remove) e["delete"] = true;
    edits.push_back(e);
  }
  Json out = {{"version", kSchemaVersion}, {"edits", edits}};
  if (script.camera_delta) out["camera_delta"] = rigid_to_json(*script.camera_delta);
  return out;
}

EditScript edits_from_json(const Json& j) {
  EditScript script;
  const Json* list = &j;
  if (j.is_object()) {
    list = &field(j, "edits");
    if (j.contains("camera_delta") && !j.at("camera_delta").is_null()) {
      script.camera_delta = rigid_from_json(j.at("camera_delta"));
    }
  }
  if (!list->is_array()) throw ValidationError("edits must be a list");
  for (const Json& e : *list) {
    PrimitiveTransform t;
    t.primitive_id = integer(field(e, "primitive_id"), "primitive_id");
    if (e.contains("translate")) t.translation = vec_from_json(e.at("translate"), "translate");
    if (e.contains("rotate_y")) t.rotation_y = number(e.at("rotate_y"), "rotate_y");
    if (e.contains("scale")) t.scale = number(e.at("scale"), "scale");
    if (e.contains("delete")) {
      if (!e.at("delete").is_boolean()) throw ValidationError("delete must be a boolean");
      t.remove = e.at("delete").get<bool>();
    }
    script.edits.push_back(t);
  }
  return script;
}

Json fit_report_to_json(const FitReport& report, bool include_wall_time) {
  Json j = {{"schema_version", kSchemaVersion},
            {"k", report.k},
            {"final_loss", report.final_loss},
            {"best_loss", report.best_loss},
            {"absrel", report.absrel},
            {"iterations_run", report.iterations_run},
            {"diverged", report.diverged}};
  if (include_wall_time) j["wall_time"] = report.wall_time;
  return j;
}

Json alignment_to_json(const DepthAlignment& a, double absrel_value) {
  return {{"schema_version", kSchemaVersion},
          {"scale", a.scale},
          {"shift", a.shift},
          {"residual", a.residual},
          {"count", a.count},
          {"degenerate", a.degenerate},
          {"absrel", absrel_value}};
}

Json texture_report_to_json(const TextureReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"psnr", r.psnr},
          {"ssim", r.ssim},
          {"valid_fraction", r.valid_fraction},
          {"valid_pixels", r.valid_pixels}};
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
}

Json read_json(const fs::path& path) {
  try {
    return parse_json(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_file(path, dump_json(j)); }

// ---------------------------------------------------------------- bundles

void write_render(const fs::path& dir, const RenderProduct& r) {
  write_pfm(dir / "depth.pfm", r.depth);
  write_cvxm(dir / "convex.cvxm", r.convex_map);
  write_pfm(dir / "points.pfm", r.points);
}

RenderProduct read_render(const fs::path& dir) {
  RenderProduct r{read_pfm(dir / "depth.pfm"), read_cvxm(dir / "convex.cvxm"),
                  read_pfm(dir / "points.pfm")};
  if (r.depth.channels() != 1 || r.points.channels() != 3 ||
      !r.depth.same_shape(r.convex_map) || !r.depth.same_shape(r.points)) {
    throw ValidationError("inconsistent render product in " + dir.string());
  }
  return r;
}

void write_correspondence(const fs::path& dir, const CorrespondenceResult& c) {
  write_pfm(dir / "coords.pfm", c.coords);
  write_pfm(dir / "confidence.pfm", c.confidence);
}

CorrespondenceResult read_correspondence(const fs::path& dir) {
  const FloatRaster xyz = read_pfm(dir / "coords.pfm");
  CorrespondenceResult c;
  c.confidence = read_pfm(dir / "confidence.pfm");
  if (xyz.channels() != 3 || c.confidence.channels() != 1 ||
      !xyz.same_shape(c.confidence)) {
    throw ValidationError("inconsistent correspondence in " + dir.string());
  }
  c.coords = FloatRaster(xyz.width(), xyz.height(), 2);
  for (int y = 0; y < xyz.height(); ++y) {
    for (int x = 0; x < xyz.width(); ++x) {
      c.coords.at(x, y, 0) = xyz.at(x, y, 0);
      c.coords.at(x, y, 1) = xyz.at(x, y, 1);
    }
  }
  return c;
}

void write_hint_package(const fs::path& dir, const HintPackage& p) {
  write_png(dir / "hint.png", p.hint);
  write_png(dir / "inpainted.png", p.inpainted);
  write_pfm(dir / "mask.pfm", p.mask.values);
  write_pfm(dir / "mask_full.pfm", p.mask_full);
}

FloatRaster depth_preview(const DepthMap& depth) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = 0.0f;
  for (float d : depth.values()) {
    if (d > 0.0f) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  FloatRaster out(depth.width(), depth.height(), 1, 0.0f);
  const float span = hi > lo ? hi - lo : 1.0f;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const float d = depth.at(x, y);
      if (d > 0.0f) out.at(x, y) = 1.0f - 0.8f * (d - lo) / span;
    }
  }
  return out;
}

FloatRaster convex_preview(const IdRaster& map) {
  static constexpr float kPalette[12][3] = {
      {0.90f, 0.30f, 0.24f}, {0.20f, 0.60f, 0.86f}, {0.18f, 0.80f, 0.44f},
      {0.95f, 0.77f, 0.06f}, {0.61f, 0.35f, 0.71f}, {0.90f, 0.49f, 0.13f},
      {0.10f, 0.74f, 0.61f}, {0.93f, 0.44f, 0.64f}, {0.50f, 0.55f, 0.55f},
      {0.40f, 0.26f, 0.13f}, {0.53f, 0.81f, 0.98f}, {0.74f, 0.98f, 0.40f}};
  FloatRaster out(map.width(), map.height(), 3, 0.0f);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const int id = map.at(x, y);
      if (id < 0) continue;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = kPalette[id % 12][c];
    }
  }
  return out;
}

}  // namespace bw
