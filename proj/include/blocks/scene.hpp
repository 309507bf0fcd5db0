#pragma once

#include <vector>

#include "blocks/camera.hpp"
#include "blocks/primitive.hpp"

namespace bw {

/// Primitive counts with trained decomposition networks; fitted scenes use
/// one of these, authored scenes may use any K >= 1.
inline constexpr int kSupportedPartCounts[] = {4, 6, 8, 10, 12, 24, 36, 48, 60, 72};

/// Primitives plus the viewing camera. `pose` maps world to camera
/// coordinates. A primitive's index is its identifier for the lifetime of
/// the scene; deletion clears `live` instead of erasing.
struct Scene {
  std::vector<ConvexPrimitive> primitives;
  CameraIntrinsics camera;
  RigidTransform pose;

  int live_count() const;
  bool operator==(const Scene&) const = default;
};

/// Validates camera, pose and every live primitive.
void validate_scene(const Scene& scene);

/// O(x): hard max of live primitive indicators. Throws when no primitive is
/// live.
double union_indicator(const Scene& scene, const Vec3& x);

struct SdfSample {
  double distance;  // Phi / delta, world units
  int id;           // primitive index, lowest wins ties
};

/// Minimum normalized SDF over live primitives.
SdfSample scene_sdf(const Scene& scene, const Vec3& x);

}  // namespace bw
