#pragma once

#include <array>
#include <span>
#include <vector>

#include "surfelnbp/losses.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace surfelnbp {

/// Gradient of the loss w.r.t. one surfel's 13 parameters. Rotation is in
/// (w, x, y, z) order.
struct SurfelGradient {
  Vec3 center = Vec3::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
  Vec2 scale = Vec2::Zero();
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();

  Eigen::Matrix<double, 13, 1> flat() const;
};

struct StepSizes {
  double center = 1e-4;
  double rotation = 1e-3;
  double scale = 1e-4;
  double opacity = 5e-3;
  double color = 1e-2;
};

/// Which parameter groups a gradient covers / an optimizer updates.
struct ParamGroups {
  bool center = true;
  bool rotation = true;
  bool scale = true;
  bool opacity = true;
  bool color = true;

  static ParamGroups appearance() { return {false, false, false, true, true}; }
};

enum class GradientMode { kAnalytic, kFiniteDifference };
enum class Optimizer { kAdam, kGradientDescent };

struct RefineParams {
  int iterations = 10;
  StepSizes steps;
  /// Analytic gradients exist for opacity and color only; the other groups
  /// are ignored in that mode.
  GradientMode mode = GradientMode::kAnalytic;
  Optimizer optimizer = Optimizer::kAdam;
  ParamGroups groups = ParamGroups::appearance();
  LossWeights weights;
  RenderSettings render;
  double fd_step = 1e-4;
  double min_scale = 1e-5;
  double divergence_factor = 10.0;
};

/// Loss averaged over the views. The opacity term is shared by all views.
LossTerms evaluate_loss(const SurfelModel& model, std::span<const Frame> frames,
                        const LossWeights& w = {}, const RenderSettings& rs = {});

/// d(evaluate_loss)/d(opacity, color) by backpropagation through the
/// compositing; all other entries are zero.
std::vector<SurfelGradient> analytic_gradient(const SurfelModel& model,
                                              std::span<const Frame> frames,
                                              const LossWeights& w = {},
                                              const RenderSettings& rs = {});

/// Central differences of evaluate_loss with step h over the selected groups.
std::vector<SurfelGradient> finite_difference_gradient(const SurfelModel& model,
                                                       std::span<const Frame> frames,
                                                       const LossWeights& w = {},
                                                       const RenderSettings& rs = {},
                                                       double h = 1e-4,
                                                       const ParamGroups& groups = {});

struct RefineTrace {
  std::vector<LossTerms> losses;  // entry 0 is the initial state, then one per iteration
};

/// Optimizes the model in place. Parameters are projected back onto their
/// domains after every step. Throws RefineDiverged when the loss exceeds
/// divergence_factor times the initial loss.
RefineTrace refine(SurfelModel& model, std::span<const Frame> frames, const RefineParams& p = {});

}  // namespace surfelnbp
