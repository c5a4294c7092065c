#include "surfelnbp/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr double kBceClamp = 1e-6;

const std::array<double, kWin>& window() {
  static const std::array<double, kWin> w = [] {
    std::array<double, kWin> v{};
    for (int i = 0; i < kWin; ++i) {
      const double d = i - kHalf;
      v[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    }
    return v;
  }();
  return w;
}

/// out(p) = sum over in-image q of w(q - p) * in(q); separable.
ImageD blur_raw(const ImageD& in) {
  const auto& w = window();
  const int W = in.width(), H = in.height();
  ImageD tmp(W, H, 0.0), out(W, H, 0.0);
  for (int y = 0; y < H; ++y) {
    const double* row = &in(0, y);
    for (int x = 0; x < W; ++x) {
      const int k0 = std::max(-kHalf, -x), k1 = std::min(kHalf, W - 1 - x);
      double s = 0;
      for (int k = k0; k <= k1; ++k) s += w[k + kHalf] * row[x + k];
      tmp(x, y) = s;
    }
  }
  for (int y = 0; y < H; ++y) {
    const int k0 = std::max(-kHalf, -y), k1 = std::min(kHalf, H - 1 - y);
    double* dst = &out(0, y);
    for (int k = k0; k <= k1; ++k) {
      const double wk = w[k + kHalf];
      const double* src = &tmp(0, y + k);
      for (int x = 0; x < W; ++x) dst[x] += wk * src[x];
    }
  }
  return out;
}

ImageD channel(const ImageRGB& img, int c) {
  ImageD out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i][c];
  return out;
}

struct SsimStats {
  ImageD mx, my, sxx, syy, sxy;
};

SsimStats ssim_stats(const ImageD& x, const ImageD& y, const ImageD& norm) {
  SsimStats s;
  const std::size_t n = x.size();
  ImageD xx(x.width(), x.height()), yy(x.width(), x.height()), xy(x.width(), x.height());
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  s.mx = blur_raw(x);
  s.my = blur_raw(y);
  s.sxx = blur_raw(xx);
  s.syy = blur_raw(yy);
  s.sxy = blur_raw(xy);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = norm[i];
    s.mx[i] /= z;
    s.my[i] /= z;
    s.sxx[i] = s.sxx[i] / z - s.mx[i] * s.mx[i];
    s.syy[i] = s.syy[i] / z - s.my[i] * s.my[i];
    s.sxy[i] = s.sxy[i] / z - s.mx[i] * s.my[i];
  }
  return s;
}

double ssim_value(const SsimStats& s, std::size_t i) {
  const double a1 = 2 * s.mx[i] * s.my[i] + kC1;
  const double a2 = 2 * s.sxy[i] + kC2;
  const double b1 = s.mx[i] * s.mx[i] + s.my[i] * s.my[i] + kC1;
  const double b2 = s.sxx[i] + s.syy[i] + kC2;
  return (a1 * a2) / (b1 * b2);
}

const ImageD& window_mass(int W, int H) {
  thread_local std::map<std::pair<int, int>, ImageD> cache;
  auto it = cache.find({W, H});
  if (it == cache.end()) it = cache.emplace(std::pair{W, H}, blur_raw(ImageD(W, H, 1.0))).first;
  return it->second;
}

// Bounding box of the region grown by the window radius. Windows centred on
// region pixels never leave it, so SSIM and its gradient there are unchanged.
struct Crop {
  int x0 = 0, y0 = 0, w = 0, h = 0;

  template <class Img>
  Img cut(const Img& in) const {
    Img out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(x, y) = in(x0 + x, y0 + y);
    return out;
  }
};

Crop region_crop(const Mask* region, int W, int H) {
  if (!region) return {0, 0, W, H};
  int x0 = W, y0 = H, x1 = -1, y1 = -1;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if ((*region)(x, y)) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
  if (x1 < 0) return {};
  x0 = std::max(0, x0 - kHalf), y0 = std::max(0, y0 - kHalf);
  x1 = std::min(W - 1, x1 + kHalf), y1 = std::min(H - 1, y1 + kHalf);
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

std::size_t count(const Mask& m) {
  std::size_t n = 0;
  for (const auto v : m.data()) n += v != 0;
  return n;
}

void require_shape(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string("resolution mismatch: ") + what);
}

double sign(double v) { return (v > 0) - (v < 0); }

}  // namespace

Mask valid_region(const Frame& frame) {
  Mask m(frame.depth.width(), frame.depth.height(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = frame.mask[i] && frame.depth[i] > 0;
  return m;
}

ImageD ssim_map(const ImageRGB& a, const ImageRGB& b) {
  require_shape(a.same_shape(b), "ssim inputs");
  const ImageD& norm = window_mass(a.width(), a.height());
  ImageD out(a.width(), a.height(), 0.0);
  for (int c = 0; c < 3; ++c) {
    const SsimStats s = ssim_stats(channel(a, c), channel(b, c), norm);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += ssim_value(s, i) / 3.0;
  }
  return out;
}

double ssim(const ImageRGB& a, const ImageRGB& b, const Mask* region) {
  require_shape(a.same_shape(b), "ssim inputs");
  if (region) require_shape(region->width() == a.width() && region->height() == a.height(),
                            "ssim region");
  const Crop crop = region_crop(region, a.width(), a.height());
  if (crop.w == 0) return 1.0;
  const ImageD map = ssim_map(crop.cut(a), crop.cut(b));
  double sum = 0;
  std::size_t n = 0;
  for (int y = 0; y < crop.h; ++y) {
    for (int x = 0; x < crop.w; ++x) {
      if (region && !(*region)(crop.x0 + x, crop.y0 + y)) continue;
      sum += map(x, y);
      ++n;
    }
  }
  return n ? sum / n : 1.0;
}

double mean_depth_error(const ImageD& rendered, const ImageD& observed, const Mask& region,
                        const ImageD& opacity) {
  require_shape(rendered.same_shape(observed) && rendered.same_shape(region), "depth maps");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i] || !(opacity[i] > kCoveredOpacity)) continue;
    sum += std::abs(rendered[i] - observed[i]);
    ++n;
  }
  return n ? sum / n : 0.0;
}

double loss_l1(const ImageRGB& observed, const ImageRGB& rendered, const Mask& region) {
  require_shape(observed.same_shape(rendered) && observed.same_shape(region), "color");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) continue;
    sum += (observed[i] - rendered[i]).cwiseAbs().sum() / 3.0;
    ++n;
  }
  return n ? sum / n : 0.0;
}

double loss_photometric(const ImageRGB& observed, const ImageRGB& rendered, const Mask& region,
                        const LossWeights& w) {
  if (count(region) == 0) return 0.0;
  return w.l1 * loss_l1(observed, rendered, region) +
         w.dssim * (1.0 - ssim(observed, rendered, &region));
}

double loss_depth(const ImageD& observed, const ImageD& rendered, const Mask& region,
                  const ImageD& opacity) {
  require_shape(observed.same_shape(rendered) && observed.same_shape(region), "depth");
  const std::size_t n = count(region);
  if (n == 0) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region[i] && opacity[i] > kCoveredOpacity) sum += std::abs(observed[i] - rendered[i]);
  }
  return sum / n;
}

NormalLosses loss_normal(const NormalMap& observed, const NormalMap& from_rendered_depth,
                         const ImageVec3& rendered, const Mask& region, const ImageD& opacity) {
  require_shape(observed.normals.same_shape(rendered) && rendered.same_shape(region), "normals");
  NormalLosses out;
  const std::size_t n = count(region);
  if (n == 0) return out;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i] || !(opacity[i] > kCoveredOpacity)) continue;
    if (observed.valid[i]) out.normal += (observed.normals[i] - rendered[i]).cwiseAbs().sum();
    if (from_rendered_depth.valid[i]) {
      out.consistency += std::abs(1.0 - from_rendered_depth.normals[i].dot(rendered[i]));
    }
  }
  out.normal /= n;
  out.consistency /= n;
  return out;
}

double loss_opacity(const SurfelModel& model) {
  if (model.empty()) return 0.0;
  double sum = 0;
  for (const auto& s : model.surfels()) {
    const double d = s.opacity - 0.5;
    sum += std::exp(-d * d / 0.05);
  }
  return sum / model.size();
}

double loss_mask(const Mask& mask, const ImageD& opacity) {
  require_shape(mask.same_shape(opacity), "mask");
  if (mask.size() == 0) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double o = std::clamp(opacity[i], kBceClamp, 1.0 - kBceClamp);
    sum += mask[i] ? -std::log(o) : -std::log(1.0 - o);
  }
  return sum / mask.size();
}

LossTerms total_loss(const Frame& frame, const RenderBuffers& buffers, const SurfelModel& model,
                     const LossWeights& w, const NormalMap* observed_normals) {
  require_shape(frame.depth.same_shape(buffers.opacity), "frame vs buffers");
  LossTerms t;
  t.opacity = loss_opacity(model);
  const Mask region = valid_region(frame);
  if (count(region) == 0) {
    t.total = w.opacity * t.opacity;
    return t;
  }
  t.l1 = loss_l1(frame.color, buffers.color, region);
  t.ssim = ssim(frame.color, buffers.color, &region);
  t.photometric = w.l1 * t.l1 + w.dssim * (1.0 - t.ssim);
  t.depth = loss_depth(frame.depth, buffers.depth, region, buffers.opacity);
  NormalMap obs_local;
  if (!observed_normals) {
    obs_local = normals_from_depth(frame.depth, frame.K);
    observed_normals = &obs_local;
  }
  const NormalMap rendered_depth_normals = normals_from_depth(buffers.depth, frame.K);
  const NormalLosses nl =
      loss_normal(*observed_normals, rendered_depth_normals, buffers.normal, region,
                  buffers.opacity);
  t.normal = nl.normal;
  t.consistency = nl.consistency;
  t.mask = loss_mask(frame.mask, buffers.opacity);
  t.total = t.photometric + w.depth * t.depth + w.normal * (t.normal + t.consistency) +
            w.mask * t.mask + w.opacity * t.opacity;
  return t;
}

namespace {

/// Accumulates d(loss)/d(depth) through normals_from_depth for one pixel.
void backprop_depth_normal(const ImageD& depth, const Intrinsics& K, int x, int y,
                           const Vec3& g_normal, ImageD& g_depth) {
  const double dl = depth(x - 1, y), dr = depth(x + 1, y);
  const double du = depth(x, y - 1), dd = depth(x, y + 1);
  const Vec3 rr = pixel_ray(K, x + 1, y), rl = pixel_ray(K, x - 1, y);
  const Vec3 rd = pixel_ray(K, x, y + 1), ru = pixel_ray(K, x, y - 1);
  const Vec3 px = rr * dr - rl * dl;
  const Vec3 py = rd * dd - ru * du;
  const Vec3 raw = px.cross(py);
  const double len = raw.norm();
  const Vec3 u = raw / len;
  const double s = u.dot(pixel_ray(K, x, y)) > 0 ? -1.0 : 1.0;
  const Vec3 g_raw = s * (g_normal - u * u.dot(g_normal)) / len;
  const Vec3 g_px = py.cross(g_raw);
  const Vec3 g_py = g_raw.cross(px);
  g_depth(x + 1, y) += rr.dot(g_px);
  g_depth(x - 1, y) -= rl.dot(g_px);
  g_depth(x, y + 1) += rd.dot(g_py);
  g_depth(x, y - 1) -= ru.dot(g_py);
}

}  // namespace

BufferGradients loss_buffer_gradients(const Frame& frame, const RenderBuffers& buffers,
                                      const LossWeights& w, const NormalMap* observed_normals) {
  require_shape(frame.depth.same_shape(buffers.opacity), "frame vs buffers");
  const int W = buffers.width(), H = buffers.height();
  BufferGradients g{ImageRGB(W, H, Vec3::Zero()), ImageD(W, H, 0.0),
                    ImageVec3(W, H, Vec3::Zero()), ImageD(W, H, 0.0)};

  // mask BCE over all pixels
  const double inv_all = 1.0 / (static_cast<double>(W) * H);
  for (std::size_t i = 0; i < g.opacity.size(); ++i) {
    const double o = buffers.opacity[i];
    if (o <= kBceClamp || o >= 1.0 - kBceClamp) continue;
    g.opacity[i] += w.mask * inv_all * (frame.mask[i] ? -1.0 / o : 1.0 / (1.0 - o));
  }

  const Mask region = valid_region(frame);
  const std::size_t n = count(region);
  if (n == 0) return g;
  const double inv_n = 1.0 / static_cast<double>(n);

  // L1 photometric
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) continue;
    for (int c = 0; c < 3; ++c) {
      g.color[i][c] -= w.l1 * inv_n / 3.0 * sign(frame.color[i][c] - buffers.color[i][c]);
    }
  }

  // D-SSIM: d/dy of -(dssim/3n) * sum_{p in region} sum_c S_c(p), on the crop
  const Crop crop = region_crop(&region, W, H);
  const ImageD& norm = window_mass(crop.w, crop.h);
  const ImageRGB obs_c = crop.cut(frame.color), ren_c = crop.cut(buffers.color);
  const Mask reg_c = crop.cut(region);
  for (int c = 0; c < 3; ++c) {
    const ImageD x = channel(obs_c, c);
    const ImageD y = channel(ren_c, c);
    const SsimStats s = ssim_stats(x, y, norm);
    ImageD fa(crop.w, crop.h, 0.0), fb(crop.w, crop.h, 0.0), fc(crop.w, crop.h, 0.0);
    const double coef = -w.dssim * inv_n / 3.0;
    for (std::size_t i = 0; i < reg_c.size(); ++i) {
      if (!reg_c[i]) continue;
      const double a1 = 2 * s.mx[i] * s.my[i] + kC1;
      const double a2 = 2 * s.sxy[i] + kC2;
      const double b1 = s.mx[i] * s.mx[i] + s.my[i] * s.my[i] + kC1;
      const double b2 = s.sxx[i] + s.syy[i] + kC2;
      const double S = (a1 * a2) / (b1 * b2);
      const double d_my = 2 * s.mx[i] * a2 / (b1 * b2) - S * 2 * s.my[i] / b1;
      const double d_syy = -S / b2;
      const double d_sxy = 2 * a1 / (b1 * b2);
      const double z = norm[i];
      fa[i] = coef * (d_my - 2 * d_syy * s.my[i] - d_sxy * s.mx[i]) / z;
      fb[i] = coef * d_syy / z;
      fc[i] = coef * d_sxy / z;
    }
    const ImageD ba = blur_raw(fa), bb = blur_raw(fb), bc = blur_raw(fc);
    for (int yy = 0; yy < crop.h; ++yy) {
      for (int xx = 0; xx < crop.w; ++xx) {
        g.color(crop.x0 + xx, crop.y0 + yy)[c] +=
            ba(xx, yy) + 2 * y(xx, yy) * bb(xx, yy) + x(xx, yy) * bc(xx, yy);
      }
    }
  }

  // depth L1
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region[i] && buffers.opacity[i] > kCoveredOpacity) {
      g.depth[i] -= w.depth * inv_n * sign(frame.depth[i] - buffers.depth[i]);
    }
  }

  // normal and consistency
  NormalMap obs_local;
  if (!observed_normals) {
    obs_local = normals_from_depth(frame.depth, frame.K);
    observed_normals = &obs_local;
  }
  const NormalMap nd = normals_from_depth(buffers.depth, frame.K);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      if (!region[i] || !(buffers.opacity[i] > kCoveredOpacity)) continue;
      const Vec3& nh = buffers.normal[i];
      if (observed_normals->valid[i]) {
        const Vec3 diff = observed_normals->normals[i] - nh;
        for (int c = 0; c < 3; ++c) g.normal[i][c] -= w.normal * inv_n * sign(diff[c]);
      }
      if (nd.valid[i]) {
        const double sg = sign(1.0 - nd.normals[i].dot(nh));
        g.normal[i] -= w.normal * inv_n * sg * nd.normals[i];
        const Vec3 g_nd = -w.normal * inv_n * sg * nh;
        backprop_depth_normal(buffers.depth, frame.K, x, y, g_nd, g.depth);
      }
    }
  }
  return g;
}

}  // namespace surfelnbp
