#include "surfelnbp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfelnbp/errors.hpp"
#include "surfelnbp/kdtree.hpp"
#include "surfelnbp/losses.hpp"
#include "surfelnbp/planner.hpp"

namespace surfelnbp {

SurfaceSamples observable_samples(const Scene& scene, const SurfaceSamples& samples,
                                  const ObservabilityParams& p) {
  const auto& b = scene.bounds();
  const Vec3 center = b.center();
  const double radius = 0.5 * b.diagonal().norm() + p.standoff;
  const auto views = generate_candidates(center, radius, p.viewpoints);
  const double cos_limit = std::cos(p.max_incidence_deg * std::numbers::pi / 180.0);
  SurfaceSamples out;
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const Vec3& x = samples.points[i];
    const Vec3& n = samples.normals[i];
    for (const auto& v : views) {
      const Vec3 to_cam = v.position - x;
      const double d = to_cam.norm();
      if (d < p.near || d > p.far) continue;
      if (std::abs(n.dot(to_cam / d)) < cos_limit) continue;
      const Vec3 dir = -to_cam / d;
      if (scene.occluded(v.position, dir, 0.0, d - 1e-4)) continue;
      out.points.push_back(x);
      out.normals.push_back(n);
      break;
    }
  }
  return out;
}

std::vector<Vec3> model_samples(const SurfelModel& model) {
  std::vector<Vec3> out;
  out.reserve(model.size() * 5);
  for (const auto& s : model.surfels()) {
    const Mat3 R = quat_to_rotation(s.rotation);
    out.push_back(s.center);
    for (const double sign : {1.0, -1.0}) {
      out.push_back(s.center + sign * s.scale.x() * R.col(0));
      out.push_back(s.center + sign * s.scale.y() * R.col(1));
    }
  }
  return out;
}

namespace {

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  const KdTree tree(to);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = tree.nearest(from[i]).distance;
  return d;
}

}  // namespace

Completion completion(std::span<const Vec3> gt, std::span<const Vec3> model, double threshold,
                      double empty_distance) {
  if (gt.empty()) throw InvalidArgument("completion: no ground-truth samples");
  Completion c;
  if (model.empty()) {
    c.distance = empty_distance * 1e3;
    return c;
  }
  const auto d = nearest_distances(gt, model);
  std::size_t hit = 0;
  double sum = 0.0;
  for (const double v : d) {
    hit += v <= threshold;
    sum += v;
  }
  c.ratio = 100.0 * static_cast<double>(hit) / static_cast<double>(d.size());
  c.distance = 1e3 * sum / static_cast<double>(d.size());
  return c;
}

double completion_ratio(std::span<const Vec3> gt, std::span<const Vec3> model,
                        double threshold) {
  return completion(gt, model, threshold, 0.0).ratio;
}

ChamferF chamfer_and_fscore(std::span<const Vec3> gt, std::span<const Vec3> model,
                            double f_threshold) {
  if (gt.empty() || model.empty()) throw InvalidArgument("chamfer: empty point set");
  const auto to_model = nearest_distances(gt, model);
  const auto to_gt = nearest_distances(model, gt);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto frac = [f_threshold](const std::vector<double>& v) {
    const auto n = std::count_if(v.begin(), v.end(), [&](double x) { return x <= f_threshold; });
    return static_cast<double>(n) / static_cast<double>(v.size());
  };
  ChamferF r;
  r.chamfer = 1e3 * 0.5 * (mean(to_model) + mean(to_gt));
  r.precision = frac(to_gt);
  r.recall = frac(to_model);
  const double pr = r.precision + r.recall;
  r.fscore = pr > 0 ? 2.0 * r.precision * r.recall / pr : 0.0;
  return r;
}

ImageQuality psnr_ssim(const ImageRGB& rendered, const ImageRGB& reference, const Mask& mask) {
  if (!rendered.same_shape(reference) || !rendered.same_shape(mask)) {
    throw InvalidArgument("psnr: resolution mismatch");
  }
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    se += (rendered[i] - reference[i]).squaredNorm();
    n += 3;
  }
  ImageQuality q;
  if (n == 0) {
    q.psnr = kMaxPsnr;
    q.ssim = 1.0;
    return q;
  }
  const double mse = se / static_cast<double>(n);
  q.psnr = mse > 0 ? std::min(kMaxPsnr, 10.0 * std::log10(1.0 / mse)) : kMaxPsnr;
  q.ssim = ssim(rendered, reference, &mask);
  return q;
}

}  // namespace surfelnbp
