#pragma once

#include <Eigen/Core>
#include <random>
#include <span>
#include <vector>

namespace bw {

using Vec3 = Eigen::Vector3d;

/// Blending temperature of the LogSumExp over plane distances.
/// Edges and corners are rounded over about 1 / delta world units.
inline constexpr double kDefaultDelta = 1000.0;
/// Sharpness of the sigmoid indicator. The inside/outside transition spans
/// about 1 / (delta * sigma) world units.
inline constexpr double kDefaultSigma = 0.75;
inline constexpr int kDefaultFaceCount = 12;
inline constexpr int kMinFaceCount = 4;

/// H(x) = normal . x + offset; positive outside, negative inside.
struct HalfPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  bool operator==(const HalfPlane&) const = default;
};

/// One smooth convex polytope: the intersection of its half-planes, blended
/// by LogSumExp and turned into a soft occupancy by a sigmoid.
struct ConvexPrimitive {
  std::vector<HalfPlane> planes;
  double delta = kDefaultDelta;
  double sigma = kDefaultSigma;
  /// Transform pivot for edits; also the probe point of the thickness
  /// regularizer during fitting.
  Vec3 center = Vec3::Zero();
  /// False once deleted. Deleted primitives keep their index.
  bool live = true;

  int face_count() const { return static_cast<int>(planes.size()); }
  bool operator==(const ConvexPrimitive&) const = default;
};

double plane_distance(const HalfPlane& plane, const Vec3& x);

/// Phi(x) = log sum_h exp(delta * H_h(x)), evaluated with max subtraction.
double smooth_sdf(const ConvexPrimitive& prim, const Vec3& x);

/// Same as smooth_sdf, also writing the softmax weights dPhi/d(delta H_h)
/// into `weights` (size face_count()).
double smooth_sdf(const ConvexPrimitive& prim, const Vec3& x,
                  std::span<double> weights);

/// Phi / delta: a 1-Lipschitz field whose zero set is the primitive surface.
double normalized_sdf(const ConvexPrimitive& prim, const Vec3& x);

/// Sigmoid(-sigma * phi), stable for any finite phi.
double indicator_from_phi(double sigma, double phi);

/// C(x) = Sigmoid(-sigma * Phi(x)).
double indicator(const ConvexPrimitive& prim, const Vec3& x);

/// Per-plane partials (dn_x, dn_y, dn_z, dd) of a scalar w.r.t. one plane.
using PlaneGradient = Eigen::Vector4d;

/// dPhi/d(n_h, d_h) for every plane at x.
std::vector<PlaneGradient> smooth_sdf_gradient(const ConvexPrimitive& prim,
                                               const Vec3& x);

/// dC/d(n_h, d_h) for every plane at x.
std::vector<PlaneGradient> indicator_gradient(const ConvexPrimitive& prim,
                                              const Vec3& x);

/// The 642 vertices of a three-times subdivided icosahedron (unit vectors).
const std::vector<Vec3>& sphere_directions();

/// True when no sampled direction escapes every half-space, i.e. every
/// direction has some plane normal with a positive component along it.
bool is_bounded(std::span<const HalfPlane> planes);

/// Throws ValidationError unless F >= 4, delta > 0, sigma > 0, all values
/// finite, normals unit length within 1e-6 and the polytope is bounded.
void validate_primitive(const ConvexPrimitive& prim);

/// Rescales each plane to a unit normal (offset divided by the same norm).
/// An exactly zero normal is replaced by a random unit vector drawn from rng.
/// Returns true when any plane changed by more than rounding.
bool normalize_planes(ConvexPrimitive& prim, std::mt19937_64& rng);

/// Twelve-plane polytope reproducing an axis-aligned box: six faces plus six
/// 45-degree edge bevels tangent to the box edges.
ConvexPrimitive box_primitive(const Vec3& center, const Vec3& half_extents,
                              double delta = kDefaultDelta,
                              double sigma = kDefaultSigma);

/// Minimizes max_h H_h(c) over c exactly (enumerating the vertices of the
/// 4-variable linear program). Returns the minimizer and writes the value,
/// i.e. minus the inradius of the hard polytope, into `max_plane_distance`.
Vec3 chebyshev_center(std::span<const HalfPlane> planes,
                      double* max_plane_distance = nullptr);

}  // namespace bw
