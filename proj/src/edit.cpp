#include "blocks/edit.hpp"

#include <cmath>
#include <set>

#include "blocks/errors.hpp"

namespace bw {

Eigen::Matrix3d rotation_y(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix3d r;
  r << c, 0.0, -s,
       0.0, 1.0, 0.0,
       s, 0.0, c;
  return r;
}

Vec3 apply_transform_inverse(const Vec3& p, const Vec3& center,
                             const PrimitiveTransform& t) {
  if (t.remove) throw ValidationError("cannot map points through a deletion");
  Vec3 q = p - center;
  if (t.translation) q -= *t.translation;
  if (t.rotation_y) {
    const double c = std::cos(-*t.rotation_y);
    const double s = std::sin(-*t.rotation_y);
    const double x = q.x() * c - q.z() * s;
    const double z = q.x() * s + q.z() * c;
    q.x() = x;
    q.z() = z;
  }
  if (t.scale) {
    if (!(*t.scale > 0.0)) throw ValidationError("scale must be positive");
    q /= *t.scale;
  }
  return q + center;
}

Vec3 apply_transform_forward(const Vec3& x, const Vec3& center,
                             const PrimitiveTransform& t) {
  if (t.remove) throw ValidationError("cannot map points through a deletion");
  Vec3 q = x - center;
  if (t.scale) {
    if (!(*t.scale > 0.0)) throw ValidationError("scale must be positive");
    q *= *t.scale;
  }
  if (t.rotation_y) q = rotation_y(*t.rotation_y) * q;
  if (t.translation) q += *t.translation;
  return q + center;
}

PrimitiveTransform invert_transform(const PrimitiveTransform& t,
                                    const Vec3& center, Vec3* new_center) {
  if (t.remove) throw ValidationError("a deletion has no inverse");
  PrimitiveTransform inv;
  inv.primitive_id = t.primitive_id;
  if (t.translation) inv.translation = -*t.translation;
  if (t.rotation_y) inv.rotation_y = -*t.rotation_y;
  if (t.scale) {
    if (!(*t.scale > 0.0)) throw ValidationError("scale must be positive");
    inv.scale = 1.0 / *t.scale;
  }
  if (new_center) *new_center = t.translation ? Vec3(center + *t.translation) : center;
  return inv;
}

PrimitiveTransform compose_transforms(const PrimitiveTransform& acc,
                                      const PrimitiveTransform& next) {
  PrimitiveTransform out = acc;
  if (next.translation) {
    out.translation = out.translation ? Vec3(*out.translation + *next.translation)
                                      : *next.translation;
  }
  if (next.rotation_y) {
    out.rotation_y = out.rotation_y ? *out.rotation_y + *next.rotation_y
                                    : *next.rotation_y;
  }
  if (next.scale) out.scale = out.scale ? *out.scale * *next.scale : *next.scale;
  out.remove = acc.remove || next.remove;
  return out;
}

ConvexPrimitive transform_primitive(const ConvexPrimitive& prim,
                                    const PrimitiveTransform& t) {
  ConvexPrimitive out = prim;
  if (t.remove) {
    out.live = false;
    return out;
  }
  const double s = t.scale.value_or(1.0);
  if (!(s > 0.0)) throw ValidationError("scale must be positive");
  const Eigen::Matrix3d rot = rotation_y(t.rotation_y.value_or(0.0));
  const Vec3 shift = t.translation.value_or(Vec3::Zero());
  const Vec3& c = prim.center;
  // n'.p + d' <= 0 on the image of {n.x + d <= 0}, with |n'| = 1:
  // n' = R n, d' = s (n.c + d) - n'.(c + T).
  for (auto& h : out.planes) {
    const Vec3 n = rot * h.normal;
    const double d = s * (h.normal.dot(c) + h.offset) - n.dot(c + shift);
    h.normal = n;
    h.offset = d;
  }
  out.center = c + shift;
  return out;
}

RigidTransform move_camera(const RigidTransform& pose,
                           const RigidTransform& camera_delta) {
  // x_old_cam = D x_new_cam  =>  world_to_new = D^-1 * world_to_old.
  return camera_delta.inverse() * pose;
}

void validate_edits(const Scene& scene, const EditScript& script) {
  std::set<int> seen;
  for (const auto& e : script.edits) {
    if (e.primitive_id < 0 ||
        e.primitive_id >= static_cast<int>(scene.primitives.size())) {
      throw ValidationError("edit references unknown primitive " +
                            std::to_string(e.primitive_id));
    }
    if (!scene.primitives[e.primitive_id].live) {
      throw ValidationError("edit references deleted primitive " +
                            std::to_string(e.primitive_id));
    }
    if (!seen.insert(e.primitive_id).second) {
      throw ValidationError("more than one edit for primitive " +
                            std::to_string(e.primitive_id));
    }
    if (e.translation && !e.translation->allFinite()) {
      throw ValidationError("translation must be finite");
    }
    if (e.rotation_y && !std::isfinite(*e.rotation_y)) {
      throw ValidationError("rotation must be finite");
    }
    if (e.scale && (!(*e.scale > 0.0) || !std::isfinite(*e.scale))) {
      throw ValidationError("scale must be positive and finite");
    }
  }
  if (script.camera_delta) validate_rigid(*script.camera_delta);
}

TransformMap collect_transforms(const EditScript& script) {
  TransformMap out;
  for (const auto& e : script.edits) {
    auto [it, inserted] = out.try_emplace(e.primitive_id, e);
    if (!inserted) it->second = compose_transforms(it->second, e);
  }
  return out;
}

Scene apply_edits(const Scene& source, const TransformMap& transforms,
                  const std::optional<RigidTransform>& camera_delta) {
  Scene out = source;
  for (const auto& [id, t] : transforms) {
    if (id < 0 || id >= static_cast<int>(out.primitives.size())) {
      throw ValidationError("edit references unknown primitive " + std::to_string(id));
    }
    out.primitives[id] = transform_primitive(source.primitives[id], t);
  }
  if (camera_delta) out.pose = move_camera(source.pose, *camera_delta);
  return out;
}

Scene apply_edits(const Scene& source, const EditScript& script) {
  validate_edits(source, script);
  return apply_edits(source, collect_transforms(script), script.camera_delta);
}

}  // namespace bw
