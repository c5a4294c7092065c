#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "surfelnbp/image.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace surfelnbp {

struct PixelIndex {
  int x = 0;
  int y = 0;
  bool operator==(const PixelIndex&) const = default;
};

/// Uniform sample without replacement of min(n, |valid|) valid pixels, in
/// row-major order.
std::vector<PixelIndex> sample_valid_pixels(const Frame& frame, std::size_t n,
                                            std::uint64_t seed);

struct CovisRecord {
  int source = 0;
  int target = 0;
  double rho = 0.0;
  std::size_t sampled = 0;    // |S_i|
  std::size_t in_frustum = 0; // |S_i->j|
  std::size_t valid = 0;      // |Omega_ij|
};

struct CovisParams {
  std::size_t samples = 1600;
  double depth_tolerance = 0.01;  // tau_d, meters
  /// When false the occlusion and back-face tests are skipped and every
  /// in-frustum point counts as valid.
  bool occlusion_aware = true;
  std::uint64_t seed = 0;
};

/// Reprojects sampled pixels of `source` into a target view whose model
/// rendering is `target`.
CovisRecord covisibility(const Frame& source, const RenderBuffers& target,
                         const Pose& target_pose, const Intrinsics& target_K,
                         const CovisParams& p = {}, int target_id = -1);
/// Renders the target view from the model first.
CovisRecord covisibility(const SurfelModel& model, const Frame& source, const Pose& target_pose,
                         const Intrinsics& target_K, const CovisParams& p = {},
                         int target_id = -1);

struct ViewRank {
  int id = 0;  // larger ids are newer
  double rho = 0.0;
};

/// Top-k by rho, ties newer first.
std::vector<int> select_local_views(std::vector<ViewRank> history, std::size_t k);

/// n draws without replacement from history \ local, each with probability
/// proportional to 1 / (1 + opt_count).
std::vector<int> select_global_views(const std::vector<int>& history,
                                     const std::vector<int>& local, std::size_t n,
                                     const std::map<int, int>& opt_counts, std::uint64_t seed);

struct ConfidenceParams {
  double d_max = 1.0;    // meters
  double c0 = 0.5;
  double tau = 0.1;
  double kappa_sat = 5.0;
  std::size_t max_views = 64;
  double depth_tolerance = 0.01;
  bool occlusion_aware = true;
};

/// Observation weight w_dist * w_front of a surfel seen from a camera.
double observation_weight(const Vec3& center, const Vec3& normal, const Vec3& camera,
                          const ConfidenceParams& p);
/// kappa from a set of camera centers; pure function used by update_confidence.
double confidence_from_views(const Vec3& center, const Vec3& normal,
                             std::span<const Vec3> cameras, const ConfidenceParams& p);

/// Adds `view_id` to the valid-view sets of the surfels that pass the
/// occlusion-aware check in `rendered` (the model seen from the view) and
/// recomputes their confidence. Returns the number of surfels touched.
std::size_t update_confidence(SurfelModel& model, int view_id, const Pose& cam_pose,
                              const Intrinsics& K, const RenderBuffers& rendered,
                              const ConfidenceParams& p);

ImageD backface_score(const ImageVec3& normals);
ImageD visibility_score(const ImageD& opacity);

enum class Phase { kExploration, kExploitation };

struct UncertaintyWeights {
  double confidence = 1.0;
  double backface = 1.0;
  double visibility = 1.0;
  Phase phase = Phase::kExploration;
};

/// Exploration (1,1,1) until the last `window` cycle means of V vary by less
/// than `tolerance` relative to their maximum; exploitation (lambda_v = 0)
/// from then on.
UncertaintyWeights update_weights(std::span<const double> cycle_mean_visibility,
                                  double tolerance = 0.05, std::size_t window = 3);

enum class Ablation { kNone, kNoOcclusion, kNoBackface, kNoDynamic, kOpacityOnly,
                      kConfidenceOnly };
Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation a);
/// Weights after the ablation's term removal.
UncertaintyWeights apply_ablation(UncertaintyWeights w, Ablation a);
/// Whether dynamic re-weighting is active under the ablation.
bool dynamic_weighting(Ablation a);

/// Pixels whose ray meets the sphere.
Mask sphere_region(const BoundingShell& sphere, const Pose& cam_pose, const Intrinsics& K);

/// lambda_k (1 - K) + lambda_b B + lambda_v V inside the region, 0 outside.
/// The region defaults to the model's bounding sphere (whole image for an
/// empty model).
ImageD uncertainty_map(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                       const UncertaintyWeights& w, const BoundingShell* region = nullptr,
                       const RenderSettings& rs = {});

/// Same map over an explicit evaluation region.
ImageD uncertainty_map(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                       const UncertaintyWeights& w, const Mask& region,
                       const RenderSettings& rs = {});

struct ViewEvaluation {
  double score = 0.0;       // mean U over the region
  double quality = 0.0;     // mean of lambda_b B + lambda_v V
  double visibility = 0.0;  // mean V
  std::size_t region_pixels = 0;
};

/// All region means from one rendering; zeros when the region is empty.
ViewEvaluation evaluate_view(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                             const UncertaintyWeights& w, const BoundingShell* region = nullptr,
                             const RenderSettings& rs = {});
ViewEvaluation evaluate_view(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                             const UncertaintyWeights& w, const Mask& region,
                             const RenderSettings& rs = {});
double view_score(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                  const UncertaintyWeights& w, const BoundingShell* region = nullptr,
                  const RenderSettings& rs = {});

}  // namespace surfelnbp
