#include "surfelnbp/view_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

std::vector<PixelIndex> sample_valid_pixels(const Frame& frame, std::size_t n,
                                            std::uint64_t seed) {
  std::vector<PixelIndex> valid;
  for (int y = 0; y < frame.depth.height(); ++y) {
    for (int x = 0; x < frame.depth.width(); ++x) {
      if (frame.mask(x, y) && frame.depth(x, y) > 0) valid.push_back({x, y});
    }
  }
  if (n >= valid.size()) return valid;
  std::vector<PixelIndex> out;
  out.reserve(n);
  std::mt19937_64 rng(seed);
  std::sample(valid.begin(), valid.end(), std::back_inserter(out), n, rng);
  return out;
}

CovisRecord covisibility(const Frame& source, const RenderBuffers& target,
                         const Pose& target_pose, const Intrinsics& target_K,
                         const CovisParams& p, int target_id) {
  if (!target.opacity.same_shape(target_K.width, target_K.height)) {
    throw InvalidArgument("covisibility: target buffers do not match intrinsics");
  }
  CovisRecord r;
  r.source = source.id;
  r.target = target_id;
  const auto samples = sample_valid_pixels(source, p.samples, p.seed);
  r.sampled = samples.size();
  for (const auto& px : samples) {
    const Vec3 world =
        source.pose.apply(backproject(source.K, Vec2(px.x, px.y), source.depth(px.x, px.y)));
    const Vec3 cam = target_pose.apply_inverse(world);
    if (!(cam.z() > 0)) continue;
    int x = 0, y = 0;
    if (!target_K.pixel_of(project(target_K, cam), x, y)) continue;
    ++r.in_frustum;
    if (p.occlusion_aware) {
      if (cam.z() - target.depth(x, y) > p.depth_tolerance) continue;
      if (target.normal(x, y).z() > 0.0) continue;
    }
    ++r.valid;
  }
  r.rho = r.sampled ? static_cast<double>(r.valid) / static_cast<double>(r.sampled) : 0.0;
  return r;
}

CovisRecord covisibility(const SurfelModel& model, const Frame& source, const Pose& target_pose,
                         const Intrinsics& target_K, const CovisParams& p, int target_id) {
  return covisibility(source, render(model, target_pose, target_K), target_pose, target_K, p,
                      target_id);
}

std::vector<int> select_local_views(std::vector<ViewRank> history, std::size_t k) {
  std::sort(history.begin(), history.end(), [](const ViewRank& a, const ViewRank& b) {
    if (a.rho != b.rho) return a.rho > b.rho;
    return a.id > b.id;
  });
  if (history.size() > k) history.resize(k);
  std::vector<int> out;
  out.reserve(history.size());
  for (const auto& v : history) out.push_back(v.id);
  return out;
}

std::vector<int> select_global_views(const std::vector<int>& history,
                                     const std::vector<int>& local, std::size_t n,
                                     const std::map<int, int>& opt_counts, std::uint64_t seed) {
  std::vector<int> pool;
  for (const int id : history) {
    if (std::find(local.begin(), local.end(), id) == local.end()) pool.push_back(id);
  }
  std::vector<double> weights;
  for (const int id : pool) {
    const auto it = opt_counts.find(id);
    const int c = it == opt_counts.end() ? 0 : it->second;
    weights.push_back(1.0 / (1.0 + std::max(0, c)));
  }
  std::mt19937_64 rng(seed);
  std::vector<int> out;
  while (out.size() < n && !pool.empty()) {
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const std::size_t i = pick(rng);
    out.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

double observation_weight(const Vec3& center, const Vec3& normal, const Vec3& camera,
                          const ConfidenceParams& p) {
  const Vec3 to_cam = camera - center;
  const double d = to_cam.norm();
  if (!(d > 0)) return 0.0;
  const double cos_v = normal.dot(to_cam / d);
  const double w_dist = std::max(0.0, 1.0 - d / p.d_max);
  const double w_front = 1.0 / (1.0 + std::exp(-(cos_v - p.c0) / p.tau));
  return w_dist * w_front;
}

double confidence_from_views(const Vec3& center, const Vec3& normal,
                             std::span<const Vec3> cameras, const ConfidenceParams& p) {
  if (cameras.empty()) return 0.0;
  double gamma = 0.0;
  Vec3 mean_dir = Vec3::Zero();
  for (const Vec3& c : cameras) {
    const Vec3 to_cam = c - center;
    const double d = to_cam.norm();
    if (!(d > 0)) continue;
    const Vec3 v = to_cam / d;
    gamma += observation_weight(center, normal, c, p) * std::max(0.0, normal.dot(v));
    mean_dir += v;
  }
  mean_dir /= static_cast<double>(cameras.size());
  const double beta = 1.0 - mean_dir.norm();
  return std::min(1.0, gamma * std::exp(beta) / p.kappa_sat);
}

std::size_t update_confidence(SurfelModel& model, int view_id, const Pose& cam_pose,
                              const Intrinsics& K, const RenderBuffers& rendered,
                              const ConfidenceParams& p) {
  if (!rendered.opacity.same_shape(K.width, K.height)) {
    throw InvalidArgument("update_confidence: buffers do not match intrinsics");
  }
  model.register_view(view_id, cam_pose.translation);
  const auto& positions = model.view_positions();
  std::size_t touched = 0;
  std::vector<Vec3> cams;
  for (Surfel& s : model.mutable_surfels()) {
    const Vec3 cam = cam_pose.apply_inverse(s.center);
    if (!(cam.z() > 0)) continue;
    int x = 0, y = 0;
    if (!K.pixel_of(project(K, cam), x, y)) continue;
    if (p.occlusion_aware) {
      const double d = rendered.depth(x, y);
      if (!(d > 0) || cam.z() - d > p.depth_tolerance) continue;
      if (rendered.normal(x, y).z() > 0.0) continue;
    }
    if (std::find(s.valid_views.begin(), s.valid_views.end(), view_id) == s.valid_views.end()) {
      s.valid_views.push_back(view_id);
    }
    const Vec3 n = surfel_normal(s);
    if (s.valid_views.size() > p.max_views) {
      // evict the weakest observation, oldest first on ties
      std::size_t worst = 0;
      double worst_w = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.valid_views.size(); ++k) {
        const Vec3& c = positions.at(s.valid_views[k]);
        const double w =
            observation_weight(s.center, n, c, p) * std::max(0.0, n.dot((c - s.center).normalized()));
        if (w < worst_w) {
          worst_w = w;
          worst = k;
        }
      }
      s.valid_views.erase(s.valid_views.begin() + static_cast<std::ptrdiff_t>(worst));
    }
    cams.clear();
    for (const int v : s.valid_views) cams.push_back(positions.at(v));
    s.confidence = confidence_from_views(s.center, n, cams, p);
    ++touched;
  }
  return touched;
}

ImageD backface_score(const ImageVec3& normals) {
  ImageD out(normals.width(), normals.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, normals[i].z());
  return out;
}

ImageD visibility_score(const ImageD& opacity) {
  ImageD out(opacity.width(), opacity.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - opacity[i];
  return out;
}

UncertaintyWeights update_weights(std::span<const double> cycle_mean_visibility,
                                  double tolerance, std::size_t window) {
  UncertaintyWeights w;
  if (window == 0) return w;
  for (std::size_t end = window; end <= cycle_mean_visibility.size(); ++end) {
    const auto first = cycle_mean_visibility.begin() + static_cast<std::ptrdiff_t>(end - window);
    const auto last = cycle_mean_visibility.begin() + static_cast<std::ptrdiff_t>(end);
    const auto [lo, hi] = std::minmax_element(first, last);
    const double change = *hi > 0 ? (*hi - *lo) / *hi : 0.0;
    if (change < tolerance) {
      w.visibility = 0.0;
      w.phase = Phase::kExploitation;
      break;
    }
  }
  return w;
}

Ablation parse_ablation(const std::string& name) {
  if (name.empty() || name == "none") return Ablation::kNone;
  if (name == "no-oa") return Ablation::kNoOcclusion;
  if (name == "no-bf") return Ablation::kNoBackface;
  if (name == "no-dyn") return Ablation::kNoDynamic;
  if (name == "opacity-only") return Ablation::kOpacityOnly;
  if (name == "confidence-only") return Ablation::kConfidenceOnly;
  throw InvalidArgument("unknown ablation '" + name + "'");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoOcclusion: return "no-oa";
    case Ablation::kNoBackface: return "no-bf";
    case Ablation::kNoDynamic: return "no-dyn";
    case Ablation::kOpacityOnly: return "opacity-only";
    case Ablation::kConfidenceOnly: return "confidence-only";
  }
  return "none";
}

UncertaintyWeights apply_ablation(UncertaintyWeights w, Ablation a) {
  switch (a) {
    case Ablation::kNoBackface:
      w.backface = 0.0;
      break;
    case Ablation::kOpacityOnly:
      w = {0.0, 0.0, 1.0, Phase::kExploration};
      break;
    case Ablation::kConfidenceOnly:
      w = {1.0, 0.0, 0.0, Phase::kExploration};
      break;
    default:
      break;
  }
  return w;
}

bool dynamic_weighting(Ablation a) {
  return a != Ablation::kNoDynamic && a != Ablation::kOpacityOnly &&
         a != Ablation::kConfidenceOnly;
}

Mask sphere_region(const BoundingShell& sphere, const Pose& cam_pose, const Intrinsics& K) {
  Mask m(K.width, K.height, 0);
  const Vec3 o = cam_pose.translation;
  const Vec3 oc = sphere.center - o;
  const double r2 = sphere.radius * sphere.radius;
  if (oc.squaredNorm() <= r2) {
    m.fill(1);
    return m;
  }
  const Mat3 R = cam_pose.rotation_matrix();
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Vec3 d = (R * pixel_ray(K, x, y)).normalized();
      const double t = oc.dot(d);
      if (t <= 0) continue;
      m(x, y) = oc.squaredNorm() - t * t <= r2;
    }
  }
  return m;
}

namespace {

Mask region_for(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                const BoundingShell* region) {
  if (region) return sphere_region(*region, cam_pose, K);
  if (model.empty()) return Mask(K.width, K.height, 1);
  return sphere_region(model.bounding_shell(0.0), cam_pose, K);
}

}  // namespace

ImageD uncertainty_map(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                       const UncertaintyWeights& w, const Mask& region, const RenderSettings& rs) {
  if (!region.same_shape(K.width, K.height)) throw InvalidArgument("region size mismatch");
  const UncertaintyChannels ch = render_uncertainty_channels(model, cam_pose, K, rs);
  ImageD out(K.width, K.height, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!region[i]) continue;
    out[i] = w.confidence * (1.0 - ch.confidence[i]) +
             w.backface * std::max(0.0, ch.normal[i].z()) + w.visibility * (1.0 - ch.opacity[i]);
  }
  return out;
}

ImageD uncertainty_map(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                       const UncertaintyWeights& w, const BoundingShell* region,
                       const RenderSettings& rs) {
  return uncertainty_map(model, cam_pose, K, w, region_for(model, cam_pose, K, region), rs);
}

ViewEvaluation evaluate_view(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                             const UncertaintyWeights& w, const Mask& region,
                             const RenderSettings& rs) {
  if (!region.same_shape(K.width, K.height)) throw InvalidArgument("region size mismatch");
  ViewEvaluation ev;
  for (const auto v : region.data()) ev.region_pixels += v != 0;
  if (ev.region_pixels == 0) return ev;
  const UncertaintyChannels ch = render_uncertainty_channels(model, cam_pose, K, rs);
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) continue;
    const double b = std::max(0.0, ch.normal[i].z());
    const double v = 1.0 - ch.opacity[i];
    ev.score += w.confidence * (1.0 - ch.confidence[i]) + w.backface * b + w.visibility * v;
    ev.quality += w.backface * b + w.visibility * v;
    ev.visibility += v;
  }
  const double n = static_cast<double>(ev.region_pixels);
  ev.score /= n;
  ev.quality /= n;
  ev.visibility /= n;
  return ev;
}

ViewEvaluation evaluate_view(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                             const UncertaintyWeights& w, const BoundingShell* region,
                             const RenderSettings& rs) {
  return evaluate_view(model, cam_pose, K, w, region_for(model, cam_pose, K, region), rs);
}

double view_score(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                  const UncertaintyWeights& w, const BoundingShell* region,
                  const RenderSettings& rs) {
  return evaluate_view(model, cam_pose, K, w, region, rs).score;
}

}  // namespace surfelnbp
