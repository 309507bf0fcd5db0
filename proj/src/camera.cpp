#include "blocks/camera.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "blocks/errors.hpp"

namespace bw {

void validate_camera(const CameraIntrinsics& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0) || !std::isfinite(cam.fx) ||
      !std::isfinite(cam.fy)) {
    throw ValidationError("camera focal lengths must be positive");
  }
  if (cam.width <= 0 || cam.height <= 0) {
    throw ValidationError("camera resolution must be positive");
  }
  if (!(cam.cx >= 0.0 && cam.cx < cam.width) ||
      !(cam.cy >= 0.0 && cam.cy < cam.height)) {
    throw ValidationError("principal point lies outside the image");
  }
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

void validate_rigid(const RigidTransform& t) {
  if (!t.rotation.allFinite() || !t.translation.allFinite()) {
    throw ValidationError("rigid transform must be finite");
  }
  const Eigen::Matrix3d err =
      t.rotation * t.rotation.transpose() - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(t.rotation.determinant() - 1.0) > 1e-6) {
    throw ValidationError("rotation is not a proper orthonormal matrix");
  }
}

Vec3 lift_pixel(const CameraIntrinsics& cam, double u, double v, double d) {
  return {(u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d};
}

LiftedPoints lift_depth(const DepthMap& depth, const CameraIntrinsics& cam) {
  if (depth.width() != cam.width || depth.height() != cam.height ||
      depth.channels() != 1) {
    throw ValidationError("depth map dimensions do not match the camera");
  }
  LiftedPoints out{Raster<double>(cam.width, cam.height, 3, 0.0),
                   Raster<std::uint8_t>(cam.width, cam.height, 1, 0)};
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const double d = depth.at(u, v);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      const Vec3 p = lift_pixel(cam, u, v, d);
      for (int c = 0; c < 3; ++c) out.points.at(u, v, c) = p[c];
      out.valid.at(u, v) = 1;
    }
  }
  return out;
}

std::pair<double, double> project_point(const CameraIntrinsics& cam,
                                        const Vec3& p) {
  if (!(p.z() > 0.0)) {
    throw ValidationError("cannot project a point with non-positive depth");
  }
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

Vec3 pixel_ray(const CameraIntrinsics& cam, double u, double v) {
  return {(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0};
}

CameraIntrinsics scaled_camera(const CameraIntrinsics& cam, int factor) {
  if (factor <= 0) throw ValidationError("scale factor must be positive");
  CameraIntrinsics out = cam;
  out.fx *= factor;
  out.fy *= factor;
  out.cx *= factor;
  out.cy *= factor;
  out.width *= factor;
  out.height *= factor;
  return out;
}

}  // namespace bw
