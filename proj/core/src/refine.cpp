#include "surfelnbp/refine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

Eigen::Matrix<double, 13, 1> SurfelGradient::flat() const {
  Eigen::Matrix<double, 13, 1> v;
  v << center, rotation, scale, opacity, color;
  return v;
}

namespace {

void require_frames(std::span<const Frame> frames) {
  if (frames.empty()) throw InvalidArgument("refine: at least one frame is required");
}

LossTerms& accumulate(LossTerms& acc, const LossTerms& t, double s) {
  acc.photometric += s * t.photometric;
  acc.l1 += s * t.l1;
  acc.depth += s * t.depth;
  acc.normal += s * t.normal;
  acc.consistency += s * t.consistency;
  acc.mask += s * t.mask;
  acc.opacity += s * t.opacity;
  acc.total += s * t.total;
  return acc;
}

LossTerms zero_terms() {
  LossTerms t;
  t.ssim = 0.0;
  return t;
}

double opacity_reg_grad(double o, std::size_t n) {
  const double d = o - 0.5;
  return std::exp(-d * d / 0.05) * (-2.0 * d / 0.05) / static_cast<double>(n);
}

/// Loss and analytic (opacity, color) gradient of one view, accumulated into
/// `grads` with factor `scale`.
LossTerms backprop_view(const SurfelModel& model, const Frame& frame, const LossWeights& w,
                        const RenderSettings& rs, double scale,
                        std::vector<SurfelGradient>& grads) {
  const Rasterizer rast(model, frame.pose, frame.K, rs);
  PixelFragments kept;
  const RenderBuffers buf = render(rast, &kept);
  const NormalMap observed = normals_from_depth(frame.depth, frame.K);
  const LossTerms terms = total_loss(frame, buf, model, w, &observed);
  const BufferGradients g = loss_buffer_gradients(frame, buf, w, &observed);

  const auto& proj = rast.projected();
  std::vector<double> e;
  for (int y = 0; y < frame.K.height; ++y) {
    for (int x = 0; x < frame.K.width; ++x) {
      const std::size_t pixel = static_cast<std::size_t>(y) * frame.K.width + x;
      const auto frags = kept.at(pixel);
      const double T_end = kept.transmittance[pixel];
      if (frags.empty()) continue;
      const double O = 1.0 - T_end;
      const Vec3& gC = g.color(x, y);
      double gO = g.opacity(x, y);
      double gSD = 0.0;
      Vec3 gSN = Vec3::Zero();
      if (O > kDefinedOpacity) {
        gSD = g.depth(x, y) / O;
        gO -= g.depth(x, y) * buf.depth(x, y) / O;
        Vec3 sn = Vec3::Zero();
        for (const auto& f : frags) sn += f.transmittance * f.alpha * proj[f.projected].normal_cam;
        const double len = sn.norm();
        if (len > 1e-12) {
          const Vec3 n = sn / len;
          gSN = (g.normal(x, y) - n * n.dot(g.normal(x, y))) / len;
        }
      }
      e.resize(frags.size());
      for (std::size_t k = 0; k < frags.size(); ++k) {
        const ProjectedSurfel& p = proj[frags[k].projected];
        e[k] = gC.dot(p.color) + gO + gSD * frags[k].depth + gSN.dot(p.normal_cam);
      }
      // suffix[k] = sum_{j > k} w_j e_j
      double suffix = 0.0;
      for (std::size_t k = frags.size(); k-- > 0;) {
        const Fragment& f = frags[k];
        const ProjectedSurfel& p = proj[f.projected];
        const double wk = f.transmittance * f.alpha;
        SurfelGradient& sg = grads[p.index];
        sg.color += scale * wk * gC;
        if (!f.alpha_clamped) {
          const double d_alpha = f.transmittance * e[k] - suffix / (1.0 - f.alpha);
          sg.opacity += scale * d_alpha * f.gaussian;
        }
        suffix += wk * e[k];
      }
    }
  }
  return terms;
}

LossTerms analytic_with_loss(const SurfelModel& model, std::span<const Frame> frames,
                             const LossWeights& w, const RenderSettings& rs,
                             std::vector<SurfelGradient>& grads) {
  require_frames(frames);
  grads.assign(model.size(), SurfelGradient{});
  const double s = 1.0 / static_cast<double>(frames.size());
  LossTerms acc = zero_terms();
  for (const Frame& f : frames) accumulate(acc, backprop_view(model, f, w, rs, s, grads), s);
  const auto& surfels = model.surfels();
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    grads[i].opacity += w.opacity * opacity_reg_grad(surfels[i].opacity, surfels.size());
  }
  return acc;
}

template <typename Fn>
void for_each_param(Surfel& s, const ParamGroups& groups, Fn&& fn) {
  if (groups.center) {
    for (int k = 0; k < 3; ++k) fn(s.center[k], 0, k);
  }
  if (groups.rotation) {
    fn(s.rotation.w(), 1, 0);
    fn(s.rotation.x(), 1, 1);
    fn(s.rotation.y(), 1, 2);
    fn(s.rotation.z(), 1, 3);
  }
  if (groups.scale) {
    for (int k = 0; k < 2; ++k) fn(s.scale[k], 2, k);
  }
  if (groups.opacity) fn(s.opacity, 3, 0);
  if (groups.color) {
    for (int k = 0; k < 3; ++k) fn(s.color[k], 4, k);
  }
}

double& grad_slot(SurfelGradient& g, int group, int k) {
  switch (group) {
    case 0: return g.center[k];
    case 1: return g.rotation[k];
    case 2: return g.scale[k];
    case 3: return g.opacity;
    default: return g.color[k];
  }
}

double step_of(const StepSizes& s, int group) {
  switch (group) {
    case 0: return s.center;
    case 1: return s.rotation;
    case 2: return s.scale;
    case 3: return s.opacity;
    default: return s.color;
  }
}

}  // namespace

LossTerms evaluate_loss(const SurfelModel& model, std::span<const Frame> frames,
                        const LossWeights& w, const RenderSettings& rs) {
  require_frames(frames);
  const double s = 1.0 / static_cast<double>(frames.size());
  LossTerms acc = zero_terms();
  for (const Frame& f : frames) {
    const RenderBuffers buf = render(model, f.pose, f.K, rs);
    const LossTerms t = total_loss(f, buf, model, w);
    accumulate(acc, t, s);
    acc.ssim += s * t.ssim;
  }
  return acc;
}

std::vector<SurfelGradient> analytic_gradient(const SurfelModel& model,
                                              std::span<const Frame> frames,
                                              const LossWeights& w, const RenderSettings& rs) {
  std::vector<SurfelGradient> grads;
  analytic_with_loss(model, frames, w, rs, grads);
  return grads;
}

std::vector<SurfelGradient> finite_difference_gradient(const SurfelModel& model,
                                                       std::span<const Frame> frames,
                                                       const LossWeights& w,
                                                       const RenderSettings& rs, double h,
                                                       const ParamGroups& groups) {
  require_frames(frames);
  if (!(h > 0)) throw InvalidArgument("finite differences: step must be positive");
  SurfelModel work = model;
  std::vector<SurfelGradient> grads(model.size());
  auto surfels = work.mutable_surfels();
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    for_each_param(surfels[i], groups, [&](double& v, int group, int k) {
      const double orig = v;
      v = orig + h;
      const double up = evaluate_loss(work, frames, w, rs).total;
      v = orig - h;
      const double down = evaluate_loss(work, frames, w, rs).total;
      v = orig;
      grad_slot(grads[i], group, k) = (up - down) / (2.0 * h);
    });
  }
  return grads;
}

RefineTrace refine(SurfelModel& model, std::span<const Frame> frames, const RefineParams& p) {
  require_frames(frames);
  if (p.iterations < 0) throw InvalidArgument("refine: negative iteration count");
  RefineTrace trace;
  const ParamGroups groups =
      p.mode == GradientMode::kAnalytic
          ? ParamGroups{false, false, false, p.groups.opacity, p.groups.color}
          : p.groups;

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<SurfelGradient> m1(model.size()), m2(model.size());
  double initial = 0.0;
  for (int it = 0; it <= p.iterations; ++it) {
    std::vector<SurfelGradient> grads;
    LossTerms loss;
    const bool last = it == p.iterations;
    if (last) {
      loss = evaluate_loss(model, frames, p.weights, p.render);
    } else if (p.mode == GradientMode::kAnalytic) {
      loss = analytic_with_loss(model, frames, p.weights, p.render, grads);
    } else {
      loss = evaluate_loss(model, frames, p.weights, p.render);
      grads = finite_difference_gradient(model, frames, p.weights, p.render, p.fd_step, groups);
    }
    trace.losses.push_back(loss);
    if (it == 0) initial = loss.total;
    if (!std::isfinite(loss.total) || loss.total > p.divergence_factor * initial + 1e-12) {
      std::ostringstream msg;
      msg << "refine diverged at iteration " << it << ": loss " << loss.total << " vs initial "
          << initial;
      throw RefineDiverged(msg.str());
    }
    if (last) break;

    const double t = it + 1;
    const double bc1 = 1.0 - std::pow(kBeta1, t), bc2 = 1.0 - std::pow(kBeta2, t);
    auto surfels = model.mutable_surfels();
    for (std::size_t i = 0; i < surfels.size(); ++i) {
      for_each_param(surfels[i], groups, [&](double& v, int group, int k) {
        const double g = grad_slot(grads[i], group, k);
        const double lr = step_of(p.steps, group);
        if (p.optimizer == Optimizer::kGradientDescent) {
          v -= lr * g;
          return;
        }
        double& a = grad_slot(m1[i], group, k);
        double& b = grad_slot(m2[i], group, k);
        a = kBeta1 * a + (1 - kBeta1) * g;
        b = kBeta2 * b + (1 - kBeta2) * g * g;
        v -= lr * (a / bc1) / (std::sqrt(b / bc2) + kEps);
      });
      Surfel& s = surfels[i];
      s.opacity = std::clamp(s.opacity, 0.0, 1.0);
      s.color = s.color.cwiseMax(0.0).cwiseMin(1.0);
      s.scale = s.scale.cwiseMax(p.min_scale);
      const double qn = s.rotation.norm();
      s.rotation = qn > 1e-12 ? Quat(s.rotation.coeffs() / qn) : Quat::Identity();
    }
    if (groups.center) model.refresh_bounds();
  }
  return trace;
}

}  // namespace surfelnbp
