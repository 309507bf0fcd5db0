#include "blocks/scene.hpp"

#include <algorithm>
#include <limits>

#include "blocks/errors.hpp"

namespace bw {

int Scene::live_count() const {
  return static_cast<int>(std::count_if(primitives.begin(), primitives.end(),
                                        [](const auto& p) { return p.live; }));
}

void validate_scene(const Scene& scene) {
  validate_camera(scene.camera);
  validate_rigid(scene.pose);
  for (const auto& p : scene.primitives) {
    if (p.live) validate_primitive(p);
  }
}

double union_indicator(const Scene& scene, const Vec3& x) {
  double best = -1.0;
  for (const auto& p : scene.primitives) {
    if (p.live) best = std::max(best, indicator(p, x));
  }
  if (best < 0.0) throw ValidationError("scene has no live primitives");
  return best;
}

SdfSample scene_sdf(const Scene& scene, const Vec3& x) {
  SdfSample best{std::numeric_limits<double>::infinity(), -1};
  for (int i = 0; i < static_cast<int>(scene.primitives.size()); ++i) {
    const auto& p = scene.primitives[i];
    if (!p.live) continue;
    const double d = normalized_sdf(p, x);
    if (d < best.distance) best = {d, i};
  }
  if (best.id < 0) throw ValidationError("scene has no live primitives");
  return best;
}

}  // namespace bw
