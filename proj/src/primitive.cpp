#include "blocks/primitive.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "blocks/errors.hpp"

namespace bw {

double plane_distance(const HalfPlane& plane, const Vec3& x) {
  return plane.normal.dot(x) + plane.offset;
}

namespace {

// Scratch sized for the common face counts; larger F falls back to the heap.
constexpr int kInlineFaces = 32;

double logsumexp_planes(const ConvexPrimitive& prim, const Vec3& x,
                        double* scaled) {
  double m = -std::numeric_limits<double>::infinity();
  const int f = prim.face_count();
  for (int h = 0; h < f; ++h) {
    scaled[h] = prim.delta * plane_distance(prim.planes[h], x);
    m = std::max(m, scaled[h]);
  }
  double sum = 0.0;
  for (int h = 0; h < f; ++h) {
    scaled[h] = std::exp(scaled[h] - m);
    sum += scaled[h];
  }
  for (int h = 0; h < f; ++h) scaled[h] /= sum;
  return m + std::log(sum);
}

}  // namespace

double smooth_sdf(const ConvexPrimitive& prim, const Vec3& x,
                  std::span<double> weights) {
  if (weights.size() < prim.planes.size()) {
    throw ValidationError("weight buffer smaller than face count");
  }
  return logsumexp_planes(prim, x, weights.data());
}

double smooth_sdf(const ConvexPrimitive& prim, const Vec3& x) {
  if (prim.face_count() <= kInlineFaces) {
    double scratch[kInlineFaces];
    return logsumexp_planes(prim, x, scratch);
  }
  std::vector<double> scratch(prim.planes.size());
  return logsumexp_planes(prim, x, scratch.data());
}

double normalized_sdf(const ConvexPrimitive& prim, const Vec3& x) {
  return smooth_sdf(prim, x) / prim.delta;
}

double indicator_from_phi(double sigma, double phi) {
  const double s = sigma * phi;
  if (s >= 0.0) {
    const double e = std::exp(-s);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(s));
}

double indicator(const ConvexPrimitive& prim, const Vec3& x) {
  return indicator_from_phi(prim.sigma, smooth_sdf(prim, x));
}

std::vector<PlaneGradient> smooth_sdf_gradient(const ConvexPrimitive& prim,
                                               const Vec3& x) {
  std::vector<double> w(prim.planes.size());
  logsumexp_planes(prim, x, w.data());
  std::vector<PlaneGradient> grad(prim.planes.size());
  for (std::size_t h = 0; h < w.size(); ++h) {
    const double g = prim.delta * w[h];
    grad[h] << g * x.x(), g * x.y(), g * x.z(), g;
  }
  return grad;
}

std::vector<PlaneGradient> indicator_gradient(const ConvexPrimitive& prim,
                                              const Vec3& x) {
  const double c = indicator(prim, x);
  const double dc_dphi = -prim.sigma * c * (1.0 - c);
  auto grad = smooth_sdf_gradient(prim, x);
  for (auto& g : grad) g *= dc_dphi;
  return grad;
}

const std::vector<Vec3>& sphere_directions() {
  static const std::vector<Vec3> dirs = [] {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts) v.normalize();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int level = 0; level < 3; ++level) {
      std::map<std::pair<int, int>, int> midpoints;
      auto midpoint = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        if (auto it = midpoints.find(key); it != midpoints.end()) {
          return it->second;
        }
        verts.push_back((verts[a] + verts[b]).normalized());
        const int id = static_cast<int>(verts.size()) - 1;
        midpoints.emplace(key, id);
        return id;
      };
      std::vector<std::array<int, 3>> next;
      next.reserve(faces.size() * 4);
      for (const auto& f : faces) {
        const int ab = midpoint(f[0], f[1]);
        const int bc = midpoint(f[1], f[2]);
        const int ca = midpoint(f[2], f[0]);
        next.push_back({f[0], ab, ca});
        next.push_back({f[1], bc, ab});
        next.push_back({f[2], ca, bc});
        next.push_back({ab, bc, ca});
      }
      faces = std::move(next);
    }
    return verts;
  }();
  return dirs;
}

bool is_bounded(std::span<const HalfPlane> planes) {
  if (planes.empty()) return false;
  for (const Vec3& v : sphere_directions()) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : planes) best = std::max(best, p.normal.dot(v));
    if (best <= 1e-9) return false;
  }
  return true;
}

void validate_primitive(const ConvexPrimitive& prim) {
  if (prim.face_count() < kMinFaceCount) {
    throw ValidationError("primitive needs at least 4 planes");
  }
  if (!(prim.delta > 0.0) || !std::isfinite(prim.delta)) {
    throw ValidationError("primitive delta must be positive");
  }
  if (!(prim.sigma > 0.0) || !std::isfinite(prim.sigma)) {
    throw ValidationError("primitive sigma must be positive");
  }
  if (!prim.center.allFinite()) {
    throw ValidationError("primitive center must be finite");
  }
  for (const auto& p : prim.planes) {
    if (!p.normal.allFinite() || !std::isfinite(p.offset)) {
      throw ValidationError("plane parameters must be finite");
    }
    if (std::abs(p.normal.norm() - 1.0) > 1e-6) {
      throw ValidationError("plane normal is not unit length");
    }
  }
  if (!is_bounded(prim.planes)) {
    throw ValidationError("primitive half-planes do not bound a region");
  }
}

bool normalize_planes(ConvexPrimitive& prim, std::mt19937_64& rng) {
  bool changed = false;
  for (auto& p : prim.planes) {
    const double n = p.normal.norm();
    if (n == 0.0) {
      std::normal_distribution<double> gauss;
      Vec3 v;
      do {
        v = Vec3(gauss(rng), gauss(rng), gauss(rng));
      } while (v.norm() == 0.0);
      p.normal = v.normalized();
      changed = true;
      continue;
    }
    // Normals within rounding of unit length are left bit-identical.
    if (std::abs(n - 1.0) <= 1e-12) continue;
    changed = true;
    p.normal /= n;
    p.offset /= n;
  }
  return changed;
}

ConvexPrimitive box_primitive(const Vec3& center, const Vec3& half_extents,
                              double delta, double sigma) {
  if (!(half_extents.array() > 0.0).all()) {
    throw ValidationError("box half extents must be positive");
  }
  ConvexPrimitive prim;
  prim.delta = delta;
  prim.sigma = sigma;
  prim.center = center;
  // Faces: n . (x - c) - h <= 0.
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {1.0, -1.0}) {
      HalfPlane p;
      p.normal = Vec3::Zero();
      p.normal[axis] = sign;
      p.offset = -p.normal.dot(center) - half_extents[axis];
      prim.planes.push_back(p);
    }
  }
  // Bevels: one per coordinate plane and sign, touching the box edge.
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const int pairs[3][2] = {{0, 1}, {1, 2}, {0, 2}};
  for (const auto& pr : pairs) {
    for (double sign : {1.0, -1.0}) {
      HalfPlane p;
      p.normal = Vec3::Zero();
      p.normal[pr[0]] = sign * inv_sqrt2;
      p.normal[pr[1]] = sign * inv_sqrt2;
      const double reach =
          (half_extents[pr[0]] + half_extents[pr[1]]) * inv_sqrt2;
      p.offset = -p.normal.dot(center) - reach;
      prim.planes.push_back(p);
    }
  }
  return prim;
}

Vec3 chebyshev_center(std::span<const HalfPlane> planes,
                      double* max_plane_distance) {
  const int f = static_cast<int>(planes.size());
  double best_t = std::numeric_limits<double>::infinity();
  Vec3 best_c = Vec3::Zero();
  Eigen::Matrix4d a;
  Eigen::Vector4d b;
  int idx[4];
  for (idx[0] = 0; idx[0] < f; ++idx[0]) {
    for (idx[1] = idx[0] + 1; idx[1] < f; ++idx[1]) {
      for (idx[2] = idx[1] + 1; idx[2] < f; ++idx[2]) {
        for (idx[3] = idx[2] + 1; idx[3] < f; ++idx[3]) {
          for (int r = 0; r < 4; ++r) {
            const auto& p = planes[idx[r]];
            a.row(r) << p.normal.x(), p.normal.y(), p.normal.z(), -1.0;
            b[r] = -p.offset;
          }
          Eigen::FullPivLU<Eigen::Matrix4d> lu(a);
          if (!lu.isInvertible()) continue;
          const Eigen::Vector4d sol = lu.solve(b);
          const Vec3 c = sol.head<3>();
          const double t = sol[3];
          if (!(t < best_t) || !c.allFinite()) continue;
          bool feasible = true;
          for (const auto& p : planes) {
            if (plane_distance(p, c) > t + 1e-9) {
              feasible = false;
              break;
            }
          }
          if (feasible) {
            best_t = t;
            best_c = c;
          }
        }
      }
    }
  }
  if (!std::isfinite(best_t)) {
    // Degenerate plane sets: fall back to subgradient descent on max_h H_h.
    Vec3 c = Vec3::Zero();
    for (int it = 0; it < 500; ++it) {
      int arg = 0;
      double m = -std::numeric_limits<double>::infinity();
      for (int h = 0; h < f; ++h) {
        const double v = plane_distance(planes[h], c);
        if (v > m) {
          m = v;
          arg = h;
        }
      }
      c -= planes[arg].normal * (0.1 / (1.0 + it));
      best_t = m;
    }
    best_c = c;
  }
  if (max_plane_distance) *max_plane_distance = best_t;
  return best_c;
}

}  // namespace bw
