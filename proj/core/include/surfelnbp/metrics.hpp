#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surfelnbp/geometry.hpp"
#include "surfelnbp/image.hpp"
#include "surfelnbp/scene.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace surfelnbp {

struct ObservabilityParams {
  int viewpoints = 256;         // Vogel hemisphere used as the reference sensor set
  double standoff = 0.2;        // meters beyond the bbox half-diagonal
  double max_incidence_deg = 75.0;
  double near = 0.1;
  double far = 3.0;
};

/// Keeps the samples that some hemisphere viewpoint sees unoccluded, in
/// range and at an incidence below the limit.
SurfaceSamples observable_samples(const Scene& scene, const SurfaceSamples& samples,
                                  const ObservabilityParams& p = {});

/// Centers plus the four rim points at +-s_x and +-s_y along the disk axes.
std::vector<Vec3> model_samples(const SurfelModel& model);

struct Completion {
  double ratio = 0.0;      // percent
  double distance = 0.0;   // mean GT -> model distance, millimeters
};

/// `empty_distance` (meters) is reported as CE when the model has no samples.
Completion completion(std::span<const Vec3> gt, std::span<const Vec3> model, double threshold,
                      double empty_distance);
double completion_ratio(std::span<const Vec3> gt, std::span<const Vec3> model,
                        double threshold);

struct ChamferF {
  double chamfer = 0.0;  // millimeters, mean of the two directional means
  double fscore = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};
ChamferF chamfer_and_fscore(std::span<const Vec3> gt, std::span<const Vec3> model,
                            double f_threshold);

struct ImageQuality {
  double psnr = 0.0;  // dB, capped at 99
  double ssim = 0.0;
};
inline constexpr double kMaxPsnr = 99.0;
ImageQuality psnr_ssim(const ImageRGB& rendered, const ImageRGB& reference, const Mask& mask);

}  // namespace surfelnbp
