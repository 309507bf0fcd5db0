#pragma once

#include <map>
#include <optional>
#include <vector>

#include "blocks/camera.hpp"
#include "blocks/scene.hpp"

namespace bw {

/// Edit of one primitive. The forward map sends a source point x to
/// center + translation + RotY(rotation_y) * scale * (x - center).
struct PrimitiveTransform {
  int primitive_id = 0;
  std::optional<Vec3> translation;
  std::optional<double> rotation_y;  // radians about world Y through center
  std::optional<double> scale;       // uniform, about center
  bool remove = false;

  bool empty() const {
    return !translation && !rotation_y && !scale && !remove;
  }
  bool operator==(const PrimitiveTransform&) const = default;
};

using TransformMap = std::map<int, PrimitiveTransform>;

/// A batch of primitive edits plus an optional camera move. camera_delta is
/// the new camera's frame expressed in the old camera's frame, so a
/// translation of (+0.1, 0, 0) moves the camera to its right.
struct EditScript {
  std::vector<PrimitiveTransform> edits;
  std::optional<RigidTransform> camera_delta;

  bool operator==(const EditScript&) const = default;
};

/// Rotation about +Y by theta acting on (x, z) as
/// x' = x cos - z sin, z' = x sin + z cos.
Eigen::Matrix3d rotation_y(double theta);

/// The inverse mapping used to pull edited points back to the source:
/// subtract center, subtract translation, rotate by -theta about Y, divide by
/// scale, add center, in that order. Throws for scale <= 0 or a delete
/// record.
Vec3 apply_transform_inverse(const Vec3& p, const Vec3& center,
                             const PrimitiveTransform& t);

/// Forward map; apply_transform_inverse(apply_transform_forward(x)) == x.
Vec3 apply_transform_forward(const Vec3& x, const Vec3& center,
                             const PrimitiveTransform& t);

/// Record whose forward map undoes `t`, pivoting at the moved center
/// center + translation (returned through new_center).
PrimitiveTransform invert_transform(const PrimitiveTransform& t,
                                    const Vec3& center, Vec3* new_center);

/// Folds `next` into `acc`: translations add, angles add, scales multiply,
/// delete is sticky. Exact whenever the pieces commute.
PrimitiveTransform compose_transforms(const PrimitiveTransform& acc,
                                      const PrimitiveTransform& next);

/// Moves a primitive's planes and center by the forward map.
ConvexPrimitive transform_primitive(const ConvexPrimitive& prim,
                                    const PrimitiveTransform& t);

/// Applies camera_delta to a world-to-camera pose.
RigidTransform move_camera(const RigidTransform& pose,
                           const RigidTransform& camera_delta);

/// Throws ValidationError for unknown or deleted ids, duplicate ids within
/// one script, non-positive or non-finite scales, and non-finite values.
void validate_edits(const Scene& scene, const EditScript& script);

/// Collapses a script to one record per primitive (later edits composed
/// into earlier ones).
TransformMap collect_transforms(const EditScript& script);

/// Source scene with every transform and the camera move applied. Deleted
/// primitives are tombstoned.
Scene apply_edits(const Scene& source, const TransformMap& transforms,
                  const std::optional<RigidTransform>& camera_delta);
Scene apply_edits(const Scene& source, const EditScript& script);

}  // namespace bw
