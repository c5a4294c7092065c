#include "surfelnbp/sensor.hpp"

#include <cmath>
#include <random>

namespace surfelnbp {

std::size_t Frame::valid_count() const {
  std::size_t n = 0;
  for (const auto m : mask.data()) n += m != 0;
  return n;
}

Frame capture(const Scene& scene, const Pose& cam_pose, const Intrinsics& K,
              const SensorSettings& settings, int frame_id) {
  K.validate();
  Frame f;
  f.id = frame_id;
  f.pose = cam_pose;
  f.K = K;
  f.color = ImageRGB(K.width, K.height, Vec3::Zero());
  f.depth = ImageD(K.width, K.height, 0.0);
  f.mask = Mask(K.width, K.height, 0);

  const bool noisy = settings.noise_sigma0 > 0 || settings.noise_sigma1 > 0;
  std::mt19937_64 rng(settings.seed ^ (0x9e3779b97f4a7c15ULL * (frame_id + 1)));
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Mat3 R = cam_pose.rotation_matrix();
  const Vec3 origin = cam_pose.translation;
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      // world-space ray whose parameter equals camera z
      const Vec3 dir = R * pixel_ray(K, x, y);
      const auto hit = scene.intersect(origin, dir, 0.0, settings.far);
      if (!hit || hit->t < settings.near) continue;
      double d = hit->t;
      if (noisy) {
        d += (settings.noise_sigma0 + settings.noise_sigma1 * d * d) * gauss(rng);
        if (d < settings.near || d > settings.far) continue;
      }
      f.depth(x, y) = d;
      f.mask(x, y) = 1;
      f.color(x, y) = scene.triangles()[hit->triangle].color;
    }
  }
  return f;
}

NormalMap normals_from_depth(const ImageD& depth, const Intrinsics& K, double max_relative_jump) {
  const int W = depth.width(), H = depth.height();
  NormalMap out{ImageVec3(W, H, Vec3::Zero()), Mask(W, H, 0)};
  for (int y = 1; y + 1 < H; ++y) {
    for (int x = 1; x + 1 < W; ++x) {
      const double d = depth(x, y);
      const double dl = depth(x - 1, y), dr = depth(x + 1, y);
      const double du = depth(x, y - 1), dd = depth(x, y + 1);
      if (!(d > 0 && dl > 0 && dr > 0 && du > 0 && dd > 0)) continue;
      const double lim = max_relative_jump * d;
      if (std::abs(dl - d) > lim || std::abs(dr - d) > lim || std::abs(du - d) > lim ||
          std::abs(dd - d) > lim) {
        continue;
      }
      const Vec3 px = pixel_ray(K, x + 1, y) * dr - pixel_ray(K, x - 1, y) * dl;
      const Vec3 py = pixel_ray(K, x, y + 1) * dd - pixel_ray(K, x, y - 1) * du;
      Vec3 n = px.cross(py);
      const double len = n.norm();
      if (!(len > 1e-15)) continue;
      n /= len;
      if (n.dot(pixel_ray(K, x, y)) > 0) n = -n;
      out.normals(x, y) = n;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

bool ray_visibility(const Scene& scene, const Vec3& p_world, const Pose& cam_pose,
                    double tolerance) {
  const Vec3 origin = cam_pose.translation;
  const Vec3 seg = p_world - origin;
  const double len = seg.norm();
  if (len <= tolerance) return true;
  const Vec3 dir = seg / len;
  return !scene.occluded(origin, dir, 0.0, len - tolerance);
}

}  // namespace surfelnbp
