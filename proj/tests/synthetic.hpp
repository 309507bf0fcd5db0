#pragma once

#include <random>
#include <vector>

#include "blocks/camera.hpp"
#include "blocks/primitive.hpp"
#include "blocks/scene.hpp"

namespace bw::testing {

struct Box {
  Vec3 lo;
  Vec3 hi;
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 half() const { return 0.5 * (hi - lo); }
};

/// Square pinhole camera with a roughly 53 degree field of view.
inline CameraIntrinsics square_camera(int size) {
  return {static_cast<double>(size), static_cast<double>(size), 0.5 * (size - 1),
          0.5 * (size - 1), size, size};
}

/// Entry distance of a ray into an axis-aligned box (slab test), or -1.
inline double ray_box(const Vec3& o, const Vec3& d, const Box& b) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.lo[a] || o[a] > b.hi[a]) return -1.0;
      continue;
    }
    double ta = (b.lo[a] - o[a]) / d[a];
    double tb = (b.hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 <= t1 && t0 > 0.0 ? t0 : -1.0;
}

/// Exact z-depth of the boxes seen through cam from pose (world to camera).
inline DepthMap box_depth(const std::vector<Box>& boxes, const CameraIntrinsics& cam,
                          const RigidTransform& pose = {}) {
  const RigidTransform cam_to_world = pose.inverse();
  DepthMap depth(cam.width, cam.height, 1, 0.0f);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      // pixel_ray has unit z, so the ray parameter is the camera-frame depth.
      const Vec3 dir = cam_to_world.rotation * pixel_ray(cam, u, v);
      double best = std::numeric_limits<double>::infinity();
      for (const Box& b : boxes) {
        const double t = ray_box(cam_to_world.translation, dir, b);
        if (t > 0.0) best = std::min(best, t);
      }
      if (std::isfinite(best)) depth.at(u, v) = static_cast<float>(best);
    }
  }
  return depth;
}

/// n boxes in front of the camera, pairwise separated by at least `gap`.
/// Every box lies off the optical axis so at least one side face is visible.
inline std::vector<Box> random_boxes(std::mt19937_64& rng, int n, double gap = 0.1) {
  std::uniform_real_distribution<double> cx(-0.7, 0.7), cy(-0.6, 0.6), cz(2.2, 3.2),
      h(0.15, 0.4);
  std::vector<Box> boxes;
  while (static_cast<int>(boxes.size()) < n) {
    const Vec3 c(cx(rng), cy(rng), cz(rng));
    const Vec3 half(h(rng), h(rng), h(rng));
    const Box b{c - half, c + half};
    const bool off_axis = b.lo.x() > 0.05 || b.hi.x() < -0.05 || b.lo.y() > 0.05 ||
                          b.hi.y() < -0.05;
    bool clear = off_axis;
    for (const Box& o : boxes) {
      bool apart = false;
      for (int a = 0; a < 3; ++a) {
        apart = apart || b.lo[a] > o.hi[a] + gap || o.lo[a] > b.hi[a] + gap;
      }
      clear = clear && apart;
    }
    if (clear) boxes.push_back(b);
  }
  return boxes;
}

/// Scene of box primitives, coordinates divided by `scale`.
inline Scene box_scene(const std::vector<Box>& boxes, const CameraIntrinsics& cam,
                       double scale = 1.0, double delta = kDefaultDelta,
                       double sigma = kDefaultSigma) {
  Scene s;
  s.camera = cam;
  for (const Box& b : boxes) {
    s.primitives.push_back(box_primitive(b.center() / scale, b.half() / scale, delta, sigma));
  }
  return s;
}

}  // namespace bw::testing
