#pragma once

#include <optional>
#include <span>
#include <vector>

#include "surfelnbp/geometry.hpp"
#include "surfelnbp/image.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace surfelnbp {

/// Per-pixel outputs of splatting. Depth and normal are zero where the
/// accumulated opacity is numerically zero.
struct RenderBuffers {
  ImageRGB color;
  ImageD depth;
  ImageVec3 normal;  // camera frame, not flipped toward the viewer
  ImageD opacity;
  ImageD confidence;

  int width() const { return opacity.width(); }
  int height() const { return opacity.height(); }
};

struct RenderSettings {
  double near = 0.01;              // surfel centers closer than this are culled
  double cutoff_sigma = 3.0;       // Mahalanobis radius beyond which alpha is 0
  double dilation = 0.3;           // px^2 added to the screen covariance diagonal
  double max_alpha = 0.99;
  double min_transmittance = 1e-4; // blending stops once T drops below this
};

/// Opacity above which a pixel counts as covered by the model.
inline constexpr double kCoveredOpacity = 1e-3;
/// Below this accumulated opacity depth/normal are left undefined (zero).
inline constexpr double kDefinedOpacity = 1e-10;

/// A surfel in screen space.
struct ProjectedSurfel {
  std::size_t index = 0;  // position in the model
  SurfelId id = 0;
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  Mat2 conic = Mat2::Identity();  // inverse of cov
  Vec3 center_cam = Vec3::Zero();
  Vec3 normal_cam = Vec3::UnitZ();
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  double confidence = 0.0;
  double depth_extent = 0.0;  // half the camera-z span of the disk's cutoff ellipse
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel footprint, clipped

  /// Unnormalized Gaussian, 1 at the mean, 0 beyond the cutoff radius.
  double gaussian(double u, double v, double cutoff_sigma) const;
  /// Camera z of the intersection of the pixel ray with the disk plane;
  /// nullopt when the ray is parallel to the plane or hits behind the camera.
  std::optional<double> depth_at(const Intrinsics& K, double u, double v) const;
  /// depth_at clamped to the z span of the disk itself. Near edge-on disks
  /// still cover pixels through the screen-space dilation, but their plane
  /// meets those rays arbitrarily far from the disk.
  std::optional<double> fragment_depth(const Intrinsics& K, double u, double v) const;
};

/// Nullopt when the surfel is culled (behind the near plane).
std::optional<ProjectedSurfel> project_surfel(const Surfel& s, const Pose& cam_pose,
                                              const Intrinsics& K,
                                              const RenderSettings& settings = {});

/// One surfel's contribution to one pixel, in compositing order.
struct Fragment {
  std::size_t projected = 0;  // index into Rasterizer::projected()
  double depth = 0.0;
  double gaussian = 0.0;
  double alpha = 0.0;
  bool alpha_clamped = false;
  double transmittance = 1.0;  // T before this fragment
};

/// Screen-space binning of a model for one camera. Gives access to the
/// depth-sorted, transmittance-truncated fragment list of every pixel; both
/// render() and the analytic gradients are built on it.
class Rasterizer {
 public:
  Rasterizer(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
             const RenderSettings& settings = {});

  const Intrinsics& intrinsics() const { return K_; }
  const std::vector<ProjectedSurfel>& projected() const { return projected_; }
  const RenderSettings& settings() const { return settings_; }

  /// Fills `out` with the sorted fragments of pixel (x, y) and returns the
  /// transmittance left after the last one.
  double fragments(int x, int y, std::vector<Fragment>& out) const;

 private:
  static constexpr int kTile = 16;
  Intrinsics K_;
  RenderSettings settings_;
  std::vector<ProjectedSurfel> projected_;
  int tiles_x_ = 0, tiles_y_ = 0;
  std::vector<std::vector<std::uint32_t>> bins_;
};

RenderBuffers render(const SurfelModel& model, const Pose& cam_pose, const Intrinsics& K,
                     const RenderSettings& settings = {});
/// Per-pixel fragment lists kept from a render, row-major.
struct PixelFragments {
  std::vector<Fragment> fragments;
  std::vector<std::uint32_t> offsets;  // pixel i owns [offsets[i], offsets[i + 1])
  std::vector<double> transmittance;   // T left after the last fragment

  std::span<const Fragment> at(std::size_t pixel) const {
    return {fragments.data() + offsets[pixel], fragments.data() + offsets[pixel + 1]};
  }
};

/// Composites an already binned model; optionally keeps the fragments.
RenderBuffers render(const Rasterizer& rast, PixelFragments* keep = nullptr);

/// The three channels consumed by viewpoint evaluation.
struct UncertaintyChannels {
  ImageD confidence;
  ImageD opacity;
  ImageVec3 normal;
};

UncertaintyChannels render_uncertainty_channels(const SurfelModel& model, const Pose& cam_pose,
                                                const Intrinsics& K,
                                                const RenderSettings& settings = {});

}  // namespace surfelnbp
