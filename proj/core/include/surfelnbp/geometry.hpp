#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace surfelnbp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform. For camera poses this maps camera coordinates into the
/// world frame: p_world = rotation * p_cam + translation.
///
/// Camera convention shared by every module: +z forward, +x right, +y down.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  /// Normalizes the quaternion.
  Pose(const Quat& q, const Vec3& t);

  static Pose identity() { return {}; }

  Mat3 rotation_matrix() const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  /// Inverse transform of a point (world -> camera for camera poses).
  Vec3 apply_inverse(const Vec3& p) const { return rotation.conjugate() * (p - translation); }
  /// Optical axis in the world frame.
  Vec3 forward() const { return rotation * Vec3::UnitZ(); }
  const Vec3& position() const { return translation; }
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Rotation angle of the relative rotation, radians.
double rotation_angle(const Quat& q);

/// Throws InvalidArgument on a zero-norm quaternion; renormalizes otherwise.
Mat3 quat_to_rotation(const Quat& q);

/// Pinhole intrinsics. Pixel (x, y) has its center at coordinate (x, y).
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Square pixels, principal point at the image center, vertical field of view in degrees.
  static Intrinsics from_vertical_fov(int width, int height, double vfov_deg);

  void validate() const;
  bool contains(const Vec2& uv) const;
  /// Nearest pixel index; returns false when outside the image.
  bool pixel_of(const Vec2& uv, int& x, int& y) const;
};

Vec2 project(const Intrinsics& K, const Vec3& p_cam);
Vec3 backproject(const Intrinsics& K, const Vec2& uv, double depth);
/// Ray direction through a pixel with unit z component.
Vec3 pixel_ray(const Intrinsics& K, double u, double v);

/// Camera at `eye` looking at `target`. `up` disambiguates roll; when it is
/// (anti)parallel to the viewing direction world +x is used instead.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Quaternion whose rotation maps +z onto the given unit normal.
Quat quat_from_normal(const Vec3& normal);

}  // namespace surfelnbp
