#include "surfelnbp/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace surfelnbp {

double ProjectedSurfel::gaussian(double u, double v, double cutoff_sigma) const {
  const double dx = u - mean.x();
  const double dy = v - mean.y();
  const double m2 = conic(0, 0) * dx * dx + 2.0 * conic(0, 1) * dx * dy + conic(1, 1) * dy * dy;
  if (m2 > cutoff_sigma * cutoff_sigma) return 0.0;
  return std::exp(-0.5 * m2);
}

std::optional<double> ProjectedSurfel::depth_at(const Intrinsics& K, double u, double v) const {
  const Vec3 ray = pixel_ray(K, u, v);
  const double denom = normal_cam.dot(ray);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = normal_cam.dot(center_cam) / denom;
  if (!(t > 0)) return std::nullopt;
  return t;  // ray has unit z, so t is the camera z
}

std::optional<double> ProjectedSurfel::fragment_depth(const Intrinsics& K, double u,
                                                      double v) const {
  const auto t = depth_at(K, u, v);
  if (!t) return t;
  return std::clamp(*t, center_cam.z() - depth_extent, center_cam.z() + depth_extent);
}

std::optional<ProjectedSurfel> project_surfel(const Surfel& s, const Pose& cam_pose,
                                              const Intrinsics& K,
                                              const RenderSettings& settings) {
  const Mat3 r_wc = cam_pose.rotation_matrix();
  const Vec3 c = r_wc.transpose() * (s.center - cam_pose.translation);
  if (!(c.z() > settings.near)) return std::nullopt;

  const Mat3 r_s = r_wc.transpose() * quat_to_rotation(s.rotation);
  const Vec3 a = r_s.col(0) * s.scale.x();
  const Vec3 b = r_s.col(1) * s.scale.y();
  const Mat3 sigma3 = a * a.transpose() + b * b.transpose();

  const double z = c.z();
  Eigen::Matrix<double, 2, 3> J;
  J << K.fx / z, 0.0, -K.fx * c.x() / (z * z), 0.0, K.fy / z, -K.fy * c.y() / (z * z);

  ProjectedSurfel p;
  p.id = s.id;
  p.mean = project(K, c);
  p.cov = J * sigma3 * J.transpose();
  p.cov(0, 0) += settings.dilation;
  p.cov(1, 1) += settings.dilation;
  p.cov(0, 1) = p.cov(1, 0) = 0.5 * (p.cov(0, 1) + p.cov(1, 0));
  const double det = p.cov.determinant();
  if (!(det > 0)) return std::nullopt;
  p.conic << p.cov(1, 1) / det, -p.cov(0, 1) / det, -p.cov(1, 0) / det, p.cov(0, 0) / det;
  p.center_cam = c;
  p.normal_cam = r_s.col(2);
  p.opacity = s.opacity;
  p.color = s.color;
  p.confidence = s.confidence;
  p.depth_extent = settings.cutoff_sigma * std::hypot(a.z(), b.z());

  const double mid = 0.5 * (p.cov(0, 0) + p.cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = settings.cutoff_sigma * std::sqrt(lambda_max);
  const double fx0 = std::ceil(p.mean.x() - radius), fx1 = std::floor(p.mean.x() + radius);
  const double fy0 = std::ceil(p.mean.y() - radius), fy1 = std::floor(p.mean.y() + radius);
  if (!std::isfinite(fx0) || !std::isfinite(fy0) || !std::isfinite(fx1) || !std::isfinite(fy1)) {
    return std::nullopt;
  }
  p.x0 = static_cast<int>(std::max(0.0, fx0));
  p.y0 = static_cast<int>(std::max(0.0, fy0));
  p.x1 = static_cast<int>(std::min<double>(K.width - 1, fx1));
  p.y1 = static_cast<int>(std::min<double>(K.height - 1, fy1));
  return p;
}

Rasterizer::Rasterizer(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                       const RenderSettings& settings)
    : K_(K), settings_(settings) {
  K_.validate();
  tiles_x_ = (K.width + kTile - 1) / kTile;
  tiles_y_ = (K.height + kTile - 1) / kTile;
  bins_.resize(static_cast<std::size_t>(tiles_x_) * tiles_y_);
  const auto& surfels = model.surfels();
  projected_.reserve(surfels.size());
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    auto p = project_surfel(surfels[i], cam_pose, K_, settings_);
    if (!p || p->x0 > p->x1 || p->y0 > p->y1) continue;
    p->index = i;
    const auto idx = static_cast<std::uint32_t>(projected_.size());
    for (int ty = p->y0 / kTile; ty <= p->y1 / kTile; ++ty) {
      for (int tx = p->x0 / kTile; tx <= p->x1 / kTile; ++tx) {
        bins_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(idx);
      }
    }
    projected_.push_back(*p);
  }
}

double Rasterizer::fragments(int x, int y, std::vector<Fragment>& out) const {
  out.clear();
  const auto& bin = bins_[static_cast<std::size_t>(y / kTile) * tiles_x_ + x / kTile];
  const double u = x, v = y;
  for (const std::uint32_t idx : bin) {
    const ProjectedSurfel& p = projected_[idx];
    if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
    const double g = p.gaussian(u, v, settings_.cutoff_sigma);
    if (g <= 0.0) continue;
    const auto d = p.fragment_depth(K_, u, v);
    if (!d) continue;
    Fragment f;
    f.projected = idx;
    f.depth = *d;
    f.gaussian = g;
    out.push_back(f);
  }
  std::sort(out.begin(), out.end(), [this](const Fragment& a, const Fragment& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return projected_[a.projected].id < projected_[b.projected].id;
  });
  double T = 1.0;
  std::size_t kept = 0;
  for (auto& f : out) {
    if (T < settings_.min_transmittance) break;
    const double raw = projected_[f.projected].opacity * f.gaussian;
    f.alpha_clamped = raw > settings_.max_alpha;
    f.alpha = std::min(raw, settings_.max_alpha);
    f.transmittance = T;
    T *= 1.0 - f.alpha;
    ++kept;
  }
  out.resize(kept);
  return T;
}

namespace {

template <bool kFull>
void composite(const Rasterizer& rast, RenderBuffers* full, UncertaintyChannels* unc,
               PixelFragments* keep) {
  const Intrinsics& K = rast.intrinsics();
  const auto& proj = rast.projected();
  std::vector<Fragment> frags;
  if (keep) {
    keep->fragments.clear();
    keep->offsets.assign(1, 0);
    keep->transmittance.clear();
  }
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const double T_end = rast.fragments(x, y, frags);
      if (keep) {
        keep->fragments.insert(keep->fragments.end(), frags.begin(), frags.end());
        keep->offsets.push_back(static_cast<std::uint32_t>(keep->fragments.size()));
        keep->transmittance.push_back(T_end);
      }
      Vec3 color = Vec3::Zero();
      Vec3 normal = Vec3::Zero();
      double depth = 0.0, conf = 0.0;
      for (const auto& f : frags) {
        const ProjectedSurfel& p = proj[f.projected];
        const double w = f.transmittance * f.alpha;
        normal += w * p.normal_cam;
        conf += w * p.confidence;
        if constexpr (kFull) {
          color += w * p.color;
          depth += w * f.depth;
        }
      }
      const double opacity = 1.0 - T_end;
      const bool defined = opacity > kDefinedOpacity && normal.norm() > 1e-12;
      const Vec3 n = defined ? Vec3(normal.normalized()) : Vec3::Zero();
      if constexpr (kFull) {
        full->color(x, y) = color;
        full->opacity(x, y) = opacity;
        full->confidence(x, y) = conf;
        full->depth(x, y) = opacity > kDefinedOpacity ? depth / opacity : 0.0;
        full->normal(x, y) = n;
      } else {
        unc->opacity(x, y) = opacity;
        unc->confidence(x, y) = conf;
        unc->normal(x, y) = n;
      }
    }
  }
}

}  // namespace

RenderBuffers render(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                     const RenderSettings& settings) {
  return render(Rasterizer(model, cam_pose, K, settings));
}

RenderBuffers render(const Rasterizer& rast, PixelFragments* keep) {
  const Intrinsics& K = rast.intrinsics();
  RenderBuffers b;
  b.color = ImageRGB(K.width, K.height, Vec3::Zero());
  b.depth = ImageD(K.width, K.height, 0.0);
  b.normal = ImageVec3(K.width, K.height, Vec3::Zero());
  b.opacity = ImageD(K.width, K.height, 0.0);
  b.confidence = ImageD(K.width, K.height, 0.0);
  composite<true>(rast, &b, nullptr, keep);
  return b;
}

UncertaintyChannels render_uncertainty_channels(const SurfelModel& model, const Pose& cam_pose,
                                                const Intrinsics& K,
                                                const RenderSettings& settings) {
  Rasterizer rast(model, cam_pose, K, settings);
  UncertaintyChannels u;
  u.confidence = ImageD(K.width, K.height, 0.0);
  u.opacity = ImageD(K.width, K.height, 0.0);
  u.normal = ImageVec3(K.width, K.height, Vec3::Zero());
  composite<false>(rast, nullptr, &u, nullptr);
  return u;
}

}  // namespace surfelnbp
