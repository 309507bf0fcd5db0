#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blocks/camera.hpp"
#include "blocks/scene.hpp"

namespace bw {

/// Labelled 3D samples drawn along camera rays of valid depth pixels.
struct SampleSet {
  std::vector<Vec3> surface;   // on the lifted depth surface, target 0.5
  std::vector<Vec3> free;      // between camera and surface, target 0
  std::vector<Vec3> interior;  // just behind the surface, target 1
};

/// Free samples sit at depth u * d, u ~ U(free_min, free_max); interior
/// samples at d * (1 + v), v ~ U(interior_min, interior_max).
inline constexpr double kFreeMin = 0.05;
inline constexpr double kFreeMax = 0.95;
inline constexpr double kInteriorMin = 0.005;
inline constexpr double kInteriorMax = 0.03;

/// Draws n_per_class pixels uniformly (with replacement) among valid pixels
/// and emits one sample of each class per pixel. Deterministic in seed.
SampleSet build_samples(const DepthMap& depth, const CameraIntrinsics& cam,
                        int n_per_class, std::uint64_t seed);

/// Free-space points on rays of invalid (depth 0) pixels, at depth uniform in
/// [min valid depth / far_factor, max valid depth * far_factor]. Empty when
/// every pixel is valid.
std::vector<Vec3> background_samples(const DepthMap& depth,
                                     const CameraIntrinsics& cam, int n,
                                     std::uint64_t seed, double far_factor);

struct LossWeights {
  double surface = 1.0;
  double occupancy = 1.0;
  double aux = 0.1;
  /// Exponent of the p-norm soft union used during training.
  double union_power = 8.0;
  /// Target minimum for -max_h H_h(center).
  double min_inradius = 0.01;
};

/// Flat parameter vector: primitive-major, plane-major, (nx, ny, nz, d).
/// Deleted primitives occupy slots that never receive gradient.
std::vector<double> pack_parameters(const Scene& scene);
void unpack_parameters(std::span<const double> params, Scene& scene);

struct LossEvaluation {
  double loss = 0.0;
  double surface_term = 0.0;
  double occupancy_term = 0.0;
  double regularizer = 0.0;
  std::vector<double> gradient;  // layout of pack_parameters
};

/// Soft occupancy used for training: (sum_k C_k^p)^(1/p) over live primitives.
double soft_union(const Scene& scene, const Vec3& x, double power);

/// Thickness regularizer sum_k max(0, r_min + max_h H_h(c_k))^2.
double degeneracy_regularizer(const Scene& scene, double min_inradius);

/// L = w_s mean (O(x_s) - 0.5)^2 + w_o [mean O(x_f)^2 + mean (O(x_i) - 1)^2]
///     + w_aux R, with exact gradients w.r.t. every plane normal and offset.
/// Primitive centers are treated as constants.
LossEvaluation occupancy_loss(const Scene& scene, const SampleSet& samples,
                              const LossWeights& weights = {});

struct FitConfig {
  int k = 12;
  int steps = 2000;
  double lr = 5e-3;
  /// The step size follows a cosine from lr down to lr * lr_final_fraction.
  double lr_final_fraction = 0.05;
  LossWeights weights;
  std::uint64_t seed = 7;
  int samples_per_class = 8192;
  int resample_every = 200;
  /// Primitive centers are re-solved every this many steps.
  int center_every = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double delta = kDefaultDelta;
  double sigma = kDefaultSigma;
  /// Each primitive's sigma starts at sigma_start_fraction of its value and
  /// rises geometrically to it over the first sigma_ramp share of the steps.
  double sigma_start_fraction = 0.1;
  double sigma_ramp = 0.6;
  /// Initial boxes are inflated by this factor about their centers.
  double inflate = 1.1;
  /// Lower bound on initial box half extents, world units.
  double min_half_extent = 0.05;
  /// Invalid pixels are treated as empty over the valid depth range widened by
  /// this factor and contribute free samples; 0 disables. Must be 0 or >= 1.
  double background_far = 1.5;
};

/// build_samples plus, when cfg.background_far > 0, background_samples
/// appended to the free class in proportion to the invalid pixel share.
SampleSet build_training_samples(const DepthMap& depth, const CameraIntrinsics& cam,
                                 const FitConfig& cfg, std::uint64_t seed);

/// Throws ValidationError on non-positive counts or weights.
void validate_fit_config(const FitConfig& cfg);

struct FitReport {
  int k = 0;
  double final_loss = 0.0;
  double best_loss = 0.0;
  /// Scale/shift aligned AbsRel of the render against the input depth;
  /// unaligned when the input depth is constant where both are valid.
  double absrel = 0.0;
  int iterations_run = 0;
  double wall_time = 0.0;  // seconds
  bool diverged = false;
};

struct FitResult {
  Scene scene;
  FitReport report;
};

/// Seeded k-means++ followed by Lloyd iterations. Returns per-point labels.
std::vector<int> kmeans(std::span<const Vec3> points, int k, std::uint64_t seed,
                        int iterations = 30);

/// K box-shaped twelve-plane primitives from k-means clusters of the lifted
/// surface, each the cluster's bounding box inflated by cfg.inflate.
Scene initialize_primitives(const DepthMap& depth, const CameraIntrinsics& cam,
                            const FitConfig& cfg);

/// Adam refinement of `initial` against the depth map. Returns the scene with
/// the lowest loss observed once sigma has reached its final value, or the
/// initial scene if none was. A non-finite loss stops early with
/// report.diverged set.
FitResult refine(const DepthMap& depth, const CameraIntrinsics& cam,
                 Scene initial, const FitConfig& cfg);

/// initialize_primitives followed by refine. `depth` is expected in the
/// normalized scale produced by normalize_depth.
FitResult fit(const DepthMap& depth, const CameraIntrinsics& cam,
              const FitConfig& cfg);

/// One fit per entry of ks, in order.
std::vector<FitReport> sweep_parts(const DepthMap& depth,
                                   const CameraIntrinsics& cam,
                                   std::span<const int> ks,
                                   const FitConfig& base = {});

struct NormalizedDepth {
  DepthMap depth;
  double scale = 1.0;  // original = normalized * scale
};

/// Divides depth by its 95th-percentile valid value.
NormalizedDepth normalize_depth(const DepthMap& depth);

/// Recomputes every live primitive's center as its Chebyshev center.
void recenter_primitives(Scene& scene);

}  // namespace bw
