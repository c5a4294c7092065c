#pragma once

#include <cstddef>
#include <vector>

#include "surfelnbp/image.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace surfelnbp {

struct UpdateThresholds {
  double opacity = 0.5;       // m_op: rendered opacity below this
  double color_mse = 0.25;    // m_tex: per-pixel mean squared channel error above this
  double depth_factor = 2.0;  // m_geo: D_hat - D above depth_factor * MDE ...
  double min_depth_error = 1e-6;  // ... and above this absolute floor (meters)
};

/// Component masks are zero outside the valid region.
struct UpdateMask {
  Mask region;  // valid-depth pixels of the frame
  Mask op, tex, geo, back;
  Mask any;  // union of the four
  double mde = 0.0;

  std::size_t count() const;
};

UpdateMask compute_update_mask(const Frame& frame, const RenderBuffers& buffers,
                               const UpdateThresholds& t = {});

struct SpawnParams {
  int stride = 1;  // only pixels with x % stride == 0 and y % stride == 0
  int k_nn = 4;
  double initial_opacity = 0.9;
  /// Upper bound on the initial scale as a multiple of the stride footprint
  /// stride * depth / fx; keeps isolated spawns from becoming huge.
  double max_scale_factor = 4.0;
};

struct SpawnResult {
  std::vector<Surfel> surfels;
  std::size_t skipped_invalid_normal = 0;
};

/// One surfel per selected pixel of mask.any. Normals come from the observed
/// depth (computed when not supplied).
SpawnResult spawn_surfels(const Frame& frame, const UpdateMask& mask, const SpawnParams& p = {},
                          const NormalMap* normals = nullptr);

}  // namespace surfelnbp
