#pragma once

#include <Eigen/Core>
#include <utility>

#include "blocks/primitive.hpp"
#include "blocks/raster.hpp"

namespace bw {

/// Pinhole intrinsics. Pixel (u, v) looks along ((u - cx) / fx, (v - cy) / fy, 1)
/// in the camera frame (x right, y down, z forward).
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Throws ValidationError unless fx, fy > 0, 0 <= cx < width, 0 <= cy < height.
void validate_camera(const CameraIntrinsics& cam);

/// Rigid transform x' = rotation * x + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const;
  /// (this * other)(x) == this->apply(other.apply(x)).
  RigidTransform operator*(const RigidTransform& other) const;
  bool operator==(const RigidTransform&) const = default;
};

/// Throws ValidationError unless rotation is orthonormal with det +1 (1e-6).
void validate_rigid(const RigidTransform& t);

/// Depth along the camera z axis; 0 marks an invalid pixel.
using DepthMap = FloatRaster;

struct LiftedPoints {
  Raster<double> points;  // 3 channels, camera frame
  Raster<std::uint8_t> valid;
};

/// X = (u - cx) d / fx, Y = (v - cy) d / fy, Z = d. Invalid pixels (d <= 0)
/// map to the origin with valid = 0.
LiftedPoints lift_depth(const DepthMap& depth, const CameraIntrinsics& cam);

/// Camera-frame point of pixel (u, v) at depth d.
Vec3 lift_pixel(const CameraIntrinsics& cam, double u, double v, double d);

/// u = fx X / Z + cx, v = fy Y / Z + cy. Throws for Z <= 0.
std::pair<double, double> project_point(const CameraIntrinsics& cam,
                                        const Vec3& p);

/// Camera-frame direction through pixel (u, v) with unit z component.
Vec3 pixel_ray(const CameraIntrinsics& cam, double u, double v);

/// Intrinsics for the same camera sampled at `factor` times the resolution,
/// so that pixel (factor * u, factor * v) sees the ray of pixel (u, v).
CameraIntrinsics scaled_camera(const CameraIntrinsics& cam, int factor);

}  // namespace bw
