#include "blocks/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "blocks/errors.hpp"
#include "blocks/metrics.hpp"
#include "blocks/parallel.hpp"
#include "blocks/render.hpp"

namespace bw {

namespace {

// Indicators below sigmoid(-40) are treated as exactly zero.
constexpr double kCullExponent = 40.0;
// exp below this is under 1e-17 of the leading plane and is dropped.
constexpr double kNegligibleExponent = -40.0;

// x^p with exact repeated multiplication for small integer p.
double power_of(double x, double p) {
  if (p == 8.0) {
    const double x2 = x * x;
    const double x4 = x2 * x2;
    return x4 * x4;
  }
  if (p == 7.0) {
    const double x2 = x * x;
    const double x3 = x2 * x;
    return x3 * x3 * x;
  }
  return std::pow(x, p);
}
constexpr std::size_t kSampleChunk = 1024;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

struct Pixel {
  int u;
  int v;
  double d;
};

std::vector<Pixel> valid_pixels(const DepthMap& depth) {
  std::vector<Pixel> out;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(u, v);
      if (d > 0.0 && std::isfinite(d)) out.push_back({u, v, d});
    }
  }
  return out;
}

// Flattened plane table for the loss inner loop.
struct PlaneTable {
  std::vector<int> prim_ids;     // live primitive -> scene index
  std::vector<int> param_base;   // live primitive -> offset in parameter vector
  std::vector<int> face_begin;   // live primitive -> first row in the table
  std::vector<int> face_count;
  std::vector<double> delta;
  std::vector<double> sigma;
  std::vector<double> nx, ny, nz, d;
  int max_faces = 0;
};

PlaneTable make_table(const Scene& scene) {
  PlaneTable t;
  int base = 0;
  for (int i = 0; i < static_cast<int>(scene.primitives.size()); ++i) {
    const auto& p = scene.primitives[i];
    if (p.live) {
      t.prim_ids.push_back(i);
      t.param_base.push_back(base);
      t.face_begin.push_back(static_cast<int>(t.nx.size()));
      t.face_count.push_back(p.face_count());
      t.delta.push_back(p.delta);
      t.sigma.push_back(p.sigma);
      t.max_faces = std::max(t.max_faces, p.face_count());
      for (const auto& h : p.planes) {
        t.nx.push_back(h.normal.x());
        t.ny.push_back(h.normal.y());
        t.nz.push_back(h.normal.z());
        t.d.push_back(h.offset);
      }
    }
    base += 4 * p.face_count();
  }
  return t;
}

struct ChunkAccumulator {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Per-sample scratch: for every live primitive its indicator and, when not
// culled, the softmax weights of its planes.
struct SampleScratch {
  std::vector<double> indicator;
  std::vector<double> one_minus;
  std::vector<double> weights;
  std::vector<char> active;
  std::vector<int> last_cull;
};

// O(x) for one sample; leaves indicators and softmax weights in `s` for the
// gradient pass.
double soft_union_sample(const PlaneTable& t, const Vec3& x, double power,
                         SampleScratch& s) {
  const int k = static_cast<int>(t.prim_ids.size());
  double cmax = 0.0;
  for (int i = 0; i < k; ++i) {
    s.active[i] = 0;
    s.indicator[i] = 0.0;
    const int f0 = t.face_begin[i];
    const int nf = t.face_count[i];
    const double scale = t.delta[i];
    const double cull = kCullExponent / (t.sigma[i] * scale);
    double* w = s.weights.data() + static_cast<std::size_t>(i) * t.max_faces;
    // Probe the plane that rejected the previous sample first.
    {
      const int r = f0 + s.last_cull[i];
      if (t.nx[r] * x.x() + t.ny[r] * x.y() + t.nz[r] * x.z() + t.d[r] > cull) continue;
    }
    double m = -std::numeric_limits<double>::infinity();
    bool culled = false;
    for (int h = 0; h < nf; ++h) {
      const int r = f0 + h;
      const double dist = t.nx[r] * x.x() + t.ny[r] * x.y() + t.nz[r] * x.z() + t.d[r];
      if (dist > cull) {
        s.last_cull[i] = h;
        culled = true;
        break;
      }
      w[h] = scale * dist;
      m = std::max(m, w[h]);
    }
    if (culled) continue;
    double sum = 0.0;
    for (int h = 0; h < nf; ++h) {
      const double e = w[h] - m;
      w[h] = e < kNegligibleExponent ? 0.0 : std::exp(e);
      sum += w[h];
    }
    const double inv = 1.0 / sum;
    for (int h = 0; h < nf; ++h) w[h] *= inv;
    const double phi = m + std::log(sum);
    s.indicator[i] = indicator_from_phi(t.sigma[i], phi);
    s.one_minus[i] = indicator_from_phi(t.sigma[i], -phi);
    s.active[i] = 1;
    cmax = std::max(cmax, s.indicator[i]);
  }
  if (cmax <= 0.0) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    if (s.active[i]) acc += power_of(s.indicator[i] / cmax, power);
  }
  if (acc == 1.0) return cmax;
  return cmax * (power == 8.0 ? std::sqrt(std::sqrt(std::sqrt(acc)))
                              : std::pow(acc, 1.0 / power));
}

void accumulate_union_gradient(const PlaneTable& t, const Vec3& x, double o,
                               double power, double dl_do,
                               const SampleScratch& s, std::vector<double>& grad) {
  if (o <= 0.0 || dl_do == 0.0) return;
  const int k = static_cast<int>(t.prim_ids.size());
  for (int i = 0; i < k; ++i) {
    if (!s.active[i] || s.indicator[i] <= 0.0) continue;
    const double c = s.indicator[i];
    const double do_dc = c == o ? 1.0 : power_of(c / o, power - 1.0);
    const double dc_dphi = -t.sigma[i] * c * s.one_minus[i];
    const double g = dl_do * do_dc * dc_dphi * t.delta[i];
    if (g == 0.0) continue;
    const double* w = s.weights.data() + static_cast<std::size_t>(i) * t.max_faces;
    double* out = grad.data() + t.param_base[i];
    for (int h = 0; h < t.face_count[i]; ++h) {
      const double gw = g * w[h];
      out[4 * h + 0] += gw * x.x();
      out[4 * h + 1] += gw * x.y();
      out[4 * h + 2] += gw * x.z();
      out[4 * h + 3] += gw;
    }
  }
}

SampleScratch make_scratch(const PlaneTable& t) {
  const std::size_t k = t.prim_ids.size();
  return {std::vector<double>(k), std::vector<double>(k),
          std::vector<double>(k * static_cast<std::size_t>(std::max(t.max_faces, 1))),
          std::vector<char>(k), std::vector<int>(k, 0)};
}

// Adds weight * mean_j (O(x_j) - target)^2 and its gradient.
void accumulate_term(const PlaneTable& t, std::span<const Vec3> pts,
                     double target, double weight, double power,
                     std::size_t param_count, double& term,
                     std::vector<double>& grad) {
  if (pts.empty() || weight == 0.0) return;
  const std::size_t chunks = chunk_count(pts.size(), kSampleChunk);
  std::vector<ChunkAccumulator> acc(chunks);
  const double scale = weight / static_cast<double>(pts.size());
  parallel_chunks(pts.size(), kSampleChunk,
                  [&](std::size_t c, std::size_t begin, std::size_t end) {
    ChunkAccumulator& a = acc[c];
    a.gradient.assign(param_count, 0.0);
    SampleScratch s = make_scratch(t);
    for (std::size_t j = begin; j < end; ++j) {
      const double o = soft_union_sample(t, pts[j], power, s);
      const double r = o - target;
      a.loss += r * r;
      accumulate_union_gradient(t, pts[j], o, power, 2.0 * r * scale, s,
                                a.gradient);
    }
  });
  double sum = 0.0;
  for (const auto& a : acc) {
    sum += a.loss;
    for (std::size_t i = 0; i < param_count; ++i) grad[i] += a.gradient[i];
  }
  term += scale * sum;
}

}  // namespace

SampleSet build_samples(const DepthMap& depth, const CameraIntrinsics& cam,
                        int n_per_class, std::uint64_t seed) {
  if (depth.width() != cam.width || depth.height() != cam.height) {
    throw ValidationError("depth map dimensions do not match the camera");
  }
  if (n_per_class <= 0) throw ValidationError("sample count must be positive");
  const auto pixels = valid_pixels(depth);
  if (pixels.empty()) throw ValidationError("depth map has no valid pixels");

  std::mt19937_64 rng(seed);
  SampleSet out;
  out.surface.reserve(n_per_class);
  out.free.reserve(n_per_class);
  out.interior.reserve(n_per_class);
  for (int i = 0; i < n_per_class; ++i) {
    const Pixel& p = pixels[uniform_index(rng, pixels.size())];
    const double u_free = uniform(rng, kFreeMin, kFreeMax);
    const double v_in = uniform(rng, kInteriorMin, kInteriorMax);
    out.surface.push_back(lift_pixel(cam, p.u, p.v, p.d));
    out.free.push_back(lift_pixel(cam, p.u, p.v, u_free * p.d));
    out.interior.push_back(lift_pixel(cam, p.u, p.v, p.d * (1.0 + v_in)));
  }
  return out;
}

std::vector<Vec3> background_samples(const DepthMap& depth,
                                     const CameraIntrinsics& cam, int n,
                                     std::uint64_t seed, double far_factor) {
  if (depth.width() != cam.width || depth.height() != cam.height) {
    throw ValidationError("depth map dimensions do not match the camera");
  }
  std::vector<std::pair<int, int>> empty;
  double near = std::numeric_limits<double>::infinity();
  double far = 0.0;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(u, v);
      if (d > 0.0 && std::isfinite(d)) {
        near = std::min(near, d);
        far = std::max(far, d);
      } else {
        empty.emplace_back(u, v);
      }
    }
  }
  std::vector<Vec3> out;
  if (empty.empty() || far <= 0.0 || n <= 0) return out;
  near /= far_factor;
  far *= far_factor;
  std::mt19937_64 rng(seed);
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto [u, v] = empty[uniform_index(rng, empty.size())];
    out.push_back(lift_pixel(cam, u, v, uniform(rng, near, far)));
  }
  return out;
}

SampleSet build_training_samples(const DepthMap& depth, const CameraIntrinsics& cam,
                                 const FitConfig& cfg, std::uint64_t seed) {
  SampleSet s = build_samples(depth, cam, cfg.samples_per_class, seed);
  if (cfg.background_far > 0.0) {
    std::size_t empty = 0;
    for (float d : depth.values()) empty += d > 0.0f && std::isfinite(d) ? 0 : 1;
    // Background rays get free samples in proportion to their pixel share.
    const int n = static_cast<int>(std::lround(
        static_cast<double>(cfg.samples_per_class) * static_cast<double>(empty) /
        static_cast<double>(depth.pixel_count())));
    const auto bg = background_samples(depth, cam, n, seed ^ 0xb5ad4eceda1ce2a9ULL,
                                       cfg.background_far);
    s.free.insert(s.free.end(), bg.begin(), bg.end());
  }
  return s;
}

std::vector<double> pack_parameters(const Scene& scene) {
  std::vector<double> params;
  for (const auto& p : scene.primitives) {
    for (const auto& h : p.planes) {
      params.insert(params.end(),
                    {h.normal.x(), h.normal.y(), h.normal.z(), h.offset});
    }
  }
  return params;
}

void unpack_parameters(std::span<const double> params, Scene& scene) {
  std::size_t i = 0;
  for (auto& p : scene.primitives) {
    for (auto& h : p.planes) {
      if (i + 4 > params.size()) {
        throw ValidationError("parameter vector too short for scene");
      }
      h.normal = Vec3(params[i], params[i + 1], params[i + 2]);
      h.offset = params[i + 3];
      i += 4;
    }
  }
  if (i != params.size()) {
    throw ValidationError("parameter vector too long for scene");
  }
}

double soft_union(const Scene& scene, const Vec3& x, double power) {
  const PlaneTable t = make_table(scene);
  SampleScratch s = make_scratch(t);
  return soft_union_sample(t, x, power, s);
}

double degeneracy_regularizer(const Scene& scene, double min_inradius) {
  double r = 0.0;
  for (const auto& p : scene.primitives) {
    if (!p.live) continue;
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& h : p.planes) m = std::max(m, plane_distance(h, p.center));
    const double gap = min_inradius + m;
    if (gap > 0.0) r += gap * gap;
  }
  return r;
}

LossEvaluation occupancy_loss(const Scene& scene, const SampleSet& samples,
                              const LossWeights& weights) {
  const PlaneTable t = make_table(scene);
  const std::size_t n_params = pack_parameters(scene).size();
  LossEvaluation out;
  out.gradient.assign(n_params, 0.0);

  accumulate_term(t, samples.surface, 0.5, weights.surface,
                  weights.union_power, n_params, out.surface_term, out.gradient);
  accumulate_term(t, samples.free, 0.0, weights.occupancy, weights.union_power,
                  n_params, out.occupancy_term, out.gradient);
  accumulate_term(t, samples.interior, 1.0, weights.occupancy,
                  weights.union_power, n_params, out.occupancy_term,
                  out.gradient);

  // Regularizer: only the plane attaining max_h H_h(center) carries gradient.
  std::size_t base = 0;
  for (const auto& p : scene.primitives) {
    if (p.live && weights.aux != 0.0) {
      int arg = 0;
      double m = -std::numeric_limits<double>::infinity();
      for (int h = 0; h < p.face_count(); ++h) {
        const double v = plane_distance(p.planes[h], p.center);
        if (v > m) {
          m = v;
          arg = h;
        }
      }
      const double gap = weights.min_inradius + m;
      if (gap > 0.0) {
        out.regularizer += gap * gap;
        const double g = weights.aux * 2.0 * gap;
        double* dst = out.gradient.data() + base + 4 * arg;
        dst[0] += g * p.center.x();
        dst[1] += g * p.center.y();
        dst[2] += g * p.center.z();
        dst[3] += g;
      }
    }
    base += 4 * p.planes.size();
  }

  out.loss = out.surface_term + out.occupancy_term + weights.aux * out.regularizer;
  return out;
}

void validate_fit_config(const FitConfig& cfg) {
  if (cfg.k <= 0) throw ValidationError("primitive count must be positive");
  if (cfg.steps < 0) throw ValidationError("step count must be non-negative");
  if (!(cfg.lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(cfg.lr_final_fraction >= 0.0 && cfg.lr_final_fraction <= 1.0)) {
    throw ValidationError("lr_final_fraction must lie in [0, 1]");
  }
  if (cfg.samples_per_class <= 0 || cfg.resample_every <= 0 ||
      cfg.center_every <= 0) {
    throw ValidationError("sampling intervals must be positive");
  }
  const auto& w = cfg.weights;
  if (!(w.surface > 0.0) || !(w.occupancy > 0.0) || !(w.aux > 0.0) ||
      !(w.union_power >= 1.0) || !(w.min_inradius > 0.0)) {
    throw ValidationError("loss weights must be positive");
  }
  if (!(cfg.sigma_start_fraction > 0.0 && cfg.sigma_start_fraction <= 1.0) ||
      !(cfg.sigma_ramp >= 0.0 && cfg.sigma_ramp < 1.0)) {
    throw ValidationError("sigma_start_fraction must lie in (0, 1], sigma_ramp in [0, 1)");
  }
  if (!(cfg.background_far == 0.0 || cfg.background_far >= 1.0)) {
    throw ValidationError("background_far must be 0 or at least 1");
  }
  if (!(cfg.delta > 0.0) || !(cfg.sigma > 0.0) || !(cfg.inflate > 0.0) ||
      !(cfg.min_half_extent > 0.0)) {
    throw ValidationError("primitive hyperparameters must be positive");
  }
}

std::vector<int> kmeans(std::span<const Vec3> points, int k, std::uint64_t seed,
                        int iterations) {
  const std::size_t n = points.size();
  if (k <= 0) throw ValidationError("k must be positive");
  if (n < static_cast<std::size_t>(k)) {
    throw ValidationError("fewer points than clusters");
  }
  std::mt19937_64 rng(seed);
  std::vector<Vec3> centers;
  centers.reserve(k);
  centers.push_back(points[uniform_index(rng, n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= d2[pick];
        if (r < 0.0) break;
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> labels(n, 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dd = (points[i] - centers[c]).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      changed = changed || labels[i] != best;
      labels[i] = best;
    }
    std::vector<Vec3> sums(k, Vec3::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[labels[i]] += points[i];
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its center.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = (points[i] - centers[labels[i]]).squaredNorm();
        if (dd > fd) {
          fd = dd;
          far = i;
        }
      }
      centers[c] = points[far];
      labels[far] = c;
      changed = true;
    }
    if (!changed && it > 0) break;
  }
  return labels;
}

Scene initialize_primitives(const DepthMap& depth, const CameraIntrinsics& cam,
                            const FitConfig& cfg) {
  validate_camera(cam);
  validate_fit_config(cfg);
  if (depth.width() != cam.width || depth.height() != cam.height) {
    throw ValidationError("depth map dimensions do not match the camera");
  }
  const auto pixels = valid_pixels(depth);
  if (pixels.size() < static_cast<std::size_t>(cfg.k)) {
    throw ValidationError("depth map has fewer valid pixels than primitives");
  }

  // Cluster a bounded, seeded subset of the lifted surface.
  constexpr std::size_t kMaxClusterPoints = 20000;
  std::vector<Vec3> pts;
  if (pixels.size() <= kMaxClusterPoints) {
    for (const auto& p : pixels) pts.push_back(lift_pixel(cam, p.u, p.v, p.d));
  } else {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t i = 0; i < kMaxClusterPoints; ++i) {
      const auto& p = pixels[uniform_index(rng, pixels.size())];
      pts.push_back(lift_pixel(cam, p.u, p.v, p.d));
    }
  }
  const auto labels = kmeans(pts, cfg.k, cfg.seed);

  Scene scene;
  scene.camera = cam;
  for (int c = 0; c < cfg.k; ++c) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (labels[i] != c) continue;
      lo = lo.cwiseMin(pts[i]);
      hi = hi.cwiseMax(pts[i]);
    }
    Vec3 center = 0.5 * (lo + hi);
    Vec3 half = 0.5 * cfg.inflate * (hi - lo);
    for (int a = 0; a < 3; ++a) {
      if (half[a] >= cfg.min_half_extent) continue;
      // Thin along this axis. Grow it, away from the camera along z so the
      // visible face stays on the observed surface.
      if (a == 2) center[a] = lo[a] + cfg.min_half_extent;
      half[a] = cfg.min_half_extent;
    }
    scene.primitives.push_back(box_primitive(center, half, cfg.delta, cfg.sigma));
  }
  return scene;
}

void recenter_primitives(Scene& scene) {
  for (auto& p : scene.primitives) {
    if (p.live) p.center = chebyshev_center(p.planes);
  }
}

namespace {

// Aligned AbsRel when the ground truth varies over the valid set, unaligned
// otherwise (alignment against constant depth is degenerate). Infinity when
// fewer than two pixels overlap.
double report_absrel(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid,
                     std::size_t n_valid) {
  if (n_valid < 2) return std::numeric_limits<double>::infinity();
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  double raw = 0.0;
  for (std::size_t i = 0; i < gt.values().size(); ++i) {
    if (!valid.values()[i]) continue;
    const float g = gt.values()[i];
    lo = std::min(lo, g);
    hi = std::max(hi, g);
    raw += std::abs(static_cast<double>(pred.values()[i]) - g) / g;
  }
  if (lo < hi) return absrel(pred, gt, valid);
  return raw / static_cast<double>(n_valid);
}

}  // namespace

FitResult refine(const DepthMap& depth, const CameraIntrinsics& cam,
                 Scene initial, const FitConfig& cfg) {
  validate_fit_config(cfg);
  validate_camera(cam);
  const auto start = std::chrono::steady_clock::now();
  if (initial.live_count() == 0) {
    throw ValidationError("initial scene has no live primitives");
  }
  initial.camera = cam;

  Scene scene = std::move(initial);
  std::vector<double> target_sigma;
  for (const auto& p : scene.primitives) target_sigma.push_back(p.sigma);
  const int ramp_steps = static_cast<int>(std::lround(cfg.sigma_ramp * cfg.steps));
  std::vector<double> params = pack_parameters(scene);
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  std::mt19937_64 rng(cfg.seed + 0x51ed2701ULL);

  Scene best = scene;
  double best_loss = std::numeric_limits<double>::infinity();
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  int iterations = 0;
  SampleSet samples;
  double b1t = 1.0;
  double b2t = 1.0;

  for (int step = 0; step < cfg.steps; ++step) {
    if (step % cfg.resample_every == 0) {
      samples = build_training_samples(depth, cam, cfg,
                              cfg.seed + static_cast<std::uint64_t>(step / cfg.resample_every));
    }
    if (step % cfg.center_every == 0) recenter_primitives(scene);
    // Geometric ramp of sigma from sigma_start_fraction to 1 over ramp_steps.
    const bool ramping = step < ramp_steps;
    const double sigma_scale =
        ramping ? std::pow(cfg.sigma_start_fraction,
                           1.0 - static_cast<double>(step) / ramp_steps)
                : 1.0;
    for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
      scene.primitives[k].sigma = target_sigma[k] * sigma_scale;
    }

    const LossEvaluation eval = occupancy_loss(scene, samples, cfg.weights);
    bool finite = std::isfinite(eval.loss);
    for (double g : eval.gradient) finite = finite && std::isfinite(g);
    if (!finite) {
      diverged = true;
      break;
    }
    last_loss = eval.loss;
    // Losses are only comparable at the final sigma.
    if (!ramping && eval.loss < best_loss) {
      best_loss = eval.loss;
      best = scene;
    }

    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    // Cosine decay from lr to lr * lr_final_fraction over the run.
    const double progress = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 0.0;
    const double lr = cfg.lr * (cfg.lr_final_fraction +
                                (1.0 - cfg.lr_final_fraction) * 0.5 *
                                    (1.0 + std::cos(std::numbers::pi * progress)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = eval.gradient[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mh = m[i] / (1.0 - b1t);
      const double vh = v[i] / (1.0 - b2t);
      params[i] -= lr * mh / (std::sqrt(vh) + cfg.epsilon);
    }
    unpack_parameters(params, scene);
    for (auto& p : scene.primitives) {
      if (p.live) normalize_planes(p, rng);
    }
    params = pack_parameters(scene);
    ++iterations;
    if (!std::ranges::all_of(params, [](double x) { return std::isfinite(x); })) {
      diverged = true;
      break;
    }
  }

  if (!diverged) {
    // Score the final state too so the last update is not wasted.
    if (samples.surface.empty()) {
      samples = build_training_samples(depth, cam, cfg, cfg.seed);
    }
    recenter_primitives(scene);
    for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
      scene.primitives[k].sigma = target_sigma[k];
    }
    const LossEvaluation eval = occupancy_loss(scene, samples, cfg.weights);
    if (std::isfinite(eval.loss)) {
      last_loss = eval.loss;
      if (eval.loss < best_loss) {
        best_loss = eval.loss;
        best = scene;
      }
    } else {
      diverged = true;
    }
  }

  recenter_primitives(best);
  FitResult result;
  result.scene = std::move(best);
  result.report.k = result.scene.live_count();
  result.report.final_loss = last_loss;
  result.report.best_loss = best_loss;
  result.report.iterations_run = iterations;
  result.report.diverged = diverged;

  const RenderProduct render = render_scene(result.scene);
  const BinaryMask valid = depth_valid_mask(render.depth, depth);
  std::size_t n_valid = 0;
  for (auto b : valid.values()) n_valid += b;
  result.report.absrel = report_absrel(render.depth, depth, valid, n_valid);
  result.report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

FitResult fit(const DepthMap& depth, const CameraIntrinsics& cam,
              const FitConfig& cfg) {
  return refine(depth, cam, initialize_primitives(depth, cam, cfg), cfg);
}

std::vector<FitReport> sweep_parts(const DepthMap& depth,
                                   const CameraIntrinsics& cam,
                                   std::span<const int> ks,
                                   const FitConfig& base) {
  if (ks.empty()) throw ValidationError("part-count list is empty");
  std::vector<FitReport> reports;
  for (int k : ks) {
    FitConfig cfg = base;
    cfg.k = k;
    reports.push_back(fit(depth, cam, cfg).report);
  }
  return reports;
}

NormalizedDepth normalize_depth(const DepthMap& depth) {
  std::vector<float> vals;
  for (float d : depth.values()) {
    if (d > 0.0f && std::isfinite(d)) vals.push_back(d);
  }
  if (vals.empty()) throw ValidationError("depth map has no valid pixels");
  const std::size_t idx = static_cast<std::size_t>(
      std::floor(0.95 * static_cast<double>(vals.size() - 1)));
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(idx), vals.end());
  const double scale = vals[idx];
  NormalizedDepth out{depth, scale};
  for (float& d : out.depth.values()) {
    d = d > 0.0f && std::isfinite(d) ? static_cast<float>(d / scale) : 0.0f;
  }
  return out;
}

}  // namespace bw
