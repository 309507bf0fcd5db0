#pragma once

#include "blocks/raster.hpp"
#include "blocks/scene.hpp"

namespace bw {

struct RenderOptions {
  int max_steps = 256;
  /// Ray length limit, world units.
  double max_distance = 20.0;
  /// A ray converges once |Phi / delta| drops below this.
  double hit_epsilon = 1e-4;
  /// Multiplier on the normalized SDF when stepping.
  double safety = 0.5;
  int bisection_iterations = 10;
};

/// Depth (camera z, 0 on miss), primitive id (-1 on miss) and world-space
/// hit points (3 channels, 0 on miss) of one view.
struct RenderProduct {
  DepthMap depth;
  IdRaster convex_map;
  FloatRaster points;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  bool operator==(const RenderProduct&) const = default;
};

/// Sphere-traces every pixel of scene.camera from scene.pose. Rays starting
/// inside a primitive are reported as misses.
RenderProduct render_scene(const Scene& scene, const RenderOptions& opts = {});

/// Marches a single world-space ray; returns the hit distance along `dir`
/// (unit length) or a negative value on miss, and the primitive id.
struct RayHit {
  double t = -1.0;
  int id = -1;
};
RayHit trace_ray(const Scene& scene, const Vec3& origin, const Vec3& dir,
                 const RenderOptions& opts = {});

}  // namespace bw
