#pragma once

#include "surfelnbp/image.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace surfelnbp {

struct LossWeights {
  double l1 = 0.8;       // photometric L1
  double dssim = 0.2;    // photometric 1 - SSIM
  double depth = 0.8;
  double normal = 0.1;   // applies to both the normal and consistency terms
  double mask = 0.1;
  double opacity = 0.01;
};

struct LossTerms {
  double photometric = 0.0;  // l1 * L1 + dssim * (1 - SSIM)
  double l1 = 0.0;
  double ssim = 1.0;
  double depth = 0.0;
  double normal = 0.0;
  double consistency = 0.0;
  double mask = 0.0;
  double opacity = 0.0;
  double total = 0.0;
};

/// Valid-depth pixels of a frame: mask set and depth positive.
Mask valid_region(const Frame& frame);

/// 11x11 Gaussian window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2. Window weights
/// are renormalized at the image border. Per-pixel value averaged over channels.
ImageD ssim_map(const ImageRGB& a, const ImageRGB& b);
/// Mean of ssim_map over the region (whole image when region is null).
double ssim(const ImageRGB& a, const ImageRGB& b, const Mask* region = nullptr);

/// Mean |D_hat - D| over region pixels the model covers; 0 if there are none.
double mean_depth_error(const ImageD& rendered, const ImageD& observed, const Mask& region,
                        const ImageD& opacity);

double loss_l1(const ImageRGB& observed, const ImageRGB& rendered, const Mask& region);
double loss_photometric(const ImageRGB& observed, const ImageRGB& rendered, const Mask& region,
                        const LossWeights& w = {});
/// Sum over covered region pixels of |D - D_hat|, divided by |region|.
double loss_depth(const ImageD& observed, const ImageD& rendered, const Mask& region,
                  const ImageD& opacity);

struct NormalLosses {
  double normal = 0.0;       // |N_obs - N_hat|_1
  double consistency = 0.0;  // |1 - N_d . N_hat|
};
NormalLosses loss_normal(const NormalMap& observed, const NormalMap& from_rendered_depth,
                         const ImageVec3& rendered, const Mask& region, const ImageD& opacity);
/// Mean over surfels of exp(-(o - 0.5)^2 / 0.05); 0 for an empty model.
double loss_opacity(const SurfelModel& model);
/// Binary cross-entropy over all pixels, opacity clamped to [1e-6, 1 - 1e-6].
double loss_mask(const Mask& mask, const ImageD& opacity);

/// Weighted sum of every term. Pixel terms are averaged over the frame's
/// valid region; with an empty region only the opacity term remains.
/// `observed_normals` may be passed to avoid recomputing them.
LossTerms total_loss(const Frame& frame, const RenderBuffers& buffers, const SurfelModel& model,
                     const LossWeights& w = {}, const NormalMap* observed_normals = nullptr);

/// d(total_loss pixel terms)/d(rendered buffers). The opacity regularizer
/// does not depend on the buffers and is excluded.
struct BufferGradients {
  ImageRGB color;
  ImageD depth;
  ImageVec3 normal;
  ImageD opacity;
};
BufferGradients loss_buffer_gradients(const Frame& frame, const RenderBuffers& buffers,
                                      const LossWeights& w = {},
                                      const NormalMap* observed_normals = nullptr);

}  // namespace surfelnbp
