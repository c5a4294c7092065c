#pragma once

#include <cstdint>

#include "surfelnbp/geometry.hpp"
#include "surfelnbp/image.hpp"
#include "surfelnbp/scene.hpp"

namespace surfelnbp {

struct SensorSettings {
  double near = 0.1;
  double far = 3.0;
  /// Depth noise sigma = sigma0 + sigma1 * d^2 (meters); zero disables noise.
  double noise_sigma0 = 0.0;
  double noise_sigma1 = 0.0;
  std::uint64_t seed = 0;
};

/// One simulated RGB-D capture. Depth is camera z in meters, 0 = no return;
/// mask(u) = 1 exactly where depth(u) > 0.
struct Frame {
  int id = 0;
  Pose pose;  // camera to world
  Intrinsics K;
  ImageRGB color;
  ImageD depth;
  Mask mask;

  std::size_t valid_count() const;
};

Frame capture(const Scene& scene, const Pose& cam_pose, const Intrinsics& K,
              const SensorSettings& settings = {}, int frame_id = 0);

struct NormalMap {
  ImageVec3 normals;  // camera frame, oriented toward the camera
  Mask valid;
};

/// Central differences of back-projected points. Pixels whose 4-neighborhood
/// leaves the valid depth, or jumps by more than `max_relative_jump` of the
/// center depth, are flagged invalid.
NormalMap normals_from_depth(const ImageD& depth, const Intrinsics& K,
                             double max_relative_jump = 0.1);

/// True iff the segment from the camera center to p hits no triangle more
/// than `tolerance` meters before p.
bool ray_visibility(const Scene& scene, const Vec3& p_world, const Pose& cam_pose,
                    double tolerance = 1e-4);

}  // namespace surfelnbp
