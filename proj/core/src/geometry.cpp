#include "surfelnbp/geometry.hpp"

#include <cmath>
#include <string>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

namespace {

Quat normalized_or_throw(const Quat& q) {
  const double n = q.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw InvalidArgument("quaternion has zero norm");
  }
  return Quat(q.coeffs() / n);
}

}  // namespace

Pose::Pose(const Quat& q, const Vec3& t) : rotation(normalized_or_throw(q)), translation(t) {}

Mat3 Pose::rotation_matrix() const { return quat_to_rotation(rotation); }

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
}

Pose inverse(const Pose& a) {
  const Quat qi = a.rotation.conjugate();
  return Pose(qi, -(qi * a.translation));
}

double rotation_angle(const Quat& q) {
  const double n = q.vec().norm();
  return 2.0 * std::atan2(n, std::abs(q.w()));
}

Mat3 quat_to_rotation(const Quat& q) {
  const Quat u = normalized_or_throw(q);
  const double w = u.w(), x = u.x(), y = u.y(), z = u.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Intrinsics Intrinsics::from_vertical_fov(int width, int height, double vfov_deg) {
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.cx = (width - 1) / 2.0;  // pixel centers sit at integer coordinates
  k.cy = (height - 1) / 2.0;
  k.fy = (height / 2.0) / std::tan(vfov_deg * M_PI / 360.0);
  k.fx = k.fy;
  k.validate();
  return k;
}

void Intrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
    throw InvalidArgument("principal point outside the image");
  }
}

bool Intrinsics::contains(const Vec2& uv) const {
  int x, y;
  return pixel_of(uv, x, y);
}

bool Intrinsics::pixel_of(const Vec2& uv, int& x, int& y) const {
  if (!std::isfinite(uv.x()) || !std::isfinite(uv.y())) return false;
  const double rx = std::floor(uv.x() + 0.5);
  const double ry = std::floor(uv.y() + 0.5);
  if (rx < 0 || ry < 0 || rx >= width || ry >= height) return false;
  x = static_cast<int>(rx);
  y = static_cast<int>(ry);
  return true;
}

Vec2 project(const Intrinsics& K, const Vec3& p_cam) {
  if (!(p_cam.z() > 0)) throw BehindCamera("point behind camera (z <= 0)");
  return {K.fx * p_cam.x() / p_cam.z() + K.cx, K.fy * p_cam.y() / p_cam.z() + K.cy};
}

Vec3 backproject(const Intrinsics& K, const Vec2& uv, double depth) {
  if (!(depth > 0)) throw InvalidArgument("invalid depth " + std::to_string(depth));
  return pixel_ray(K, uv.x(), uv.y()) * depth;
}

Vec3 pixel_ray(const Intrinsics& K, double u, double v) {
  return {(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0};
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 f = (target - eye).normalized();
  Vec3 right = f.cross(up);
  if (right.norm() < 1e-9) right = f.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = f.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = f;
  return Pose(Quat(r), eye);
}

Quat quat_from_normal(const Vec3& normal) {
  return Quat::FromTwoVectors(Vec3::UnitZ(), normal.normalized()).normalized();
}

}  // namespace surfelnbp
