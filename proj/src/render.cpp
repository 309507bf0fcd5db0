#include "blocks/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "blocks/errors.hpp"
#include "blocks/parallel.hpp"

namespace bw {

namespace {

// Union SDF with a per-primitive early out: max_h H_h is a lower bound of
// Phi / delta, so a primitive whose bound already exceeds the running
// minimum cannot win.
SdfSample fast_scene_sdf(const std::vector<const ConvexPrimitive*>& prims,
                         const std::vector<int>& ids, const Vec3& x) {
  SdfSample best{std::numeric_limits<double>::infinity(), -1};
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const ConvexPrimitive& p = *prims[i];
    bool skip = false;
    for (const auto& plane : p.planes) {
      if (plane_distance(plane, x) >= best.distance) {
        skip = true;
        break;
      }
    }
    if (skip) continue;
    const double d = normalized_sdf(p, x);
    if (d < best.distance) best = {d, ids[i]};
  }
  return best;
}

struct LivePrimitives {
  std::vector<const ConvexPrimitive*> prims;
  std::vector<int> ids;
};

LivePrimitives collect_live(const Scene& scene) {
  LivePrimitives live;
  for (int i = 0; i < static_cast<int>(scene.primitives.size()); ++i) {
    if (scene.primitives[i].live) {
      live.prims.push_back(&scene.primitives[i]);
      live.ids.push_back(i);
    }
  }
  if (live.prims.empty()) throw ValidationError("scene has no live primitives");
  return live;
}

RayHit march(const LivePrimitives& live, const Vec3& origin, const Vec3& dir,
             const RenderOptions& opts) {
  double t = 0.0;
  double t_prev = 0.0;
  for (int step = 0; step < opts.max_steps; ++step) {
    const SdfSample s = fast_scene_sdf(live.prims, live.ids, origin + t * dir);
    if (step == 0 && s.distance < 0.0) return {};
    if (std::abs(s.distance) < opts.hit_epsilon) return {t, s.id};
    if (s.distance < 0.0) {
      // Overshoot: bisect between the last outside sample and t.
      double lo = t_prev;
      double hi = t;
      for (int i = 0; i < opts.bisection_iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (fast_scene_sdf(live.prims, live.ids, origin + mid * dir).distance > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const double th = 0.5 * (lo + hi);
      return {th, fast_scene_sdf(live.prims, live.ids, origin + th * dir).id};
    }
    t_prev = t;
    t += opts.safety * s.distance;
    if (t > opts.max_distance) return {};
  }
  return {};
}

}  // namespace

RayHit trace_ray(const Scene& scene, const Vec3& origin, const Vec3& dir,
                 const RenderOptions& opts) {
  return march(collect_live(scene), origin, dir.normalized(), opts);
}

RenderProduct render_scene(const Scene& scene, const RenderOptions& opts) {
  validate_camera(scene.camera);
  validate_rigid(scene.pose);
  const LivePrimitives live = collect_live(scene);
  const CameraIntrinsics& cam = scene.camera;
  const RigidTransform cam_to_world = scene.pose.inverse();
  const Vec3 origin = cam_to_world.translation;

  RenderProduct out{DepthMap(cam.width, cam.height, 1, 0.0f),
                    IdRaster(cam.width, cam.height, 1, -1),
                    FloatRaster(cam.width, cam.height, 3, 0.0f)};

  parallel_chunks(static_cast<std::size_t>(cam.height), 4,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
    for (int v = static_cast<int>(begin); v < static_cast<int>(end); ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const Vec3 ray_cam = pixel_ray(cam, u, v);
        const double len = ray_cam.norm();
        const Vec3 dir = cam_to_world.rotation * (ray_cam / len);
        const RayHit hit = march(live, origin, dir, opts);
        if (hit.id < 0) continue;
        const double z = hit.t / len;
        if (!(z > 0.0)) continue;
        const Vec3 p = origin + hit.t * dir;
        out.depth.at(u, v) = static_cast<float>(z);
        out.convex_map.at(u, v) = hit.id;
        for (int c = 0; c < 3; ++c) out.points.at(u, v, c) = static_cast<float>(p[c]);
      }
    }
  });
  return out;
}

}  // namespace bw
