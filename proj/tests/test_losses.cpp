#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "surfelnbp/kdtree.hpp"
#include "surfelnbp/losses.hpp"
#include "surfelnbp/scene.hpp"
#include "surfelnbp/sensor.hpp"

using namespace surfelnbp;

namespace {

// --- straightforward re-implementations, no shared code with the library ---

double ref_ssim_pixel(const ImageRGB& a, const ImageRGB& b, int px, int py) {
  const int W = a.width(), H = a.height();
  double total = 0;
  for (int c = 0; c < 3; ++c) {
    double wsum = 0, ma = 0, mb = 0;
    for (int dy = -5; dy <= 5; ++dy) {
      for (int dx = -5; dx <= 5; ++dx) {
        const int x = px + dx, y = py + dy;
        if (x < 0 || y < 0 || x >= W || y >= H) continue;
        const double w = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
        wsum += w;
        ma += w * a(x, y)[c];
        mb += w * b(x, y)[c];
      }
    }
    ma /= wsum;
    mb /= wsum;
    double va = 0, vb = 0, cov = 0;
    for (int dy = -5; dy <= 5; ++dy) {
      for (int dx = -5; dx <= 5; ++dx) {
        const int x = px + dx, y = py + dy;
        if (x < 0 || y < 0 || x >= W || y >= H) continue;
        const double w = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5)) / wsum;
        va += w * (a(x, y)[c] - ma) * (a(x, y)[c] - ma);
        vb += w * (b(x, y)[c] - mb) * (b(x, y)[c] - mb);
        cov += w * (a(x, y)[c] - ma) * (b(x, y)[c] - mb);
      }
    }
    const double C1 = 1e-4, C2 = 9e-4;
    total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
  }
  return total / 3;
}

struct RandomPair {
  Frame frame;
  RenderBuffers buf;
};

// Observed frame from a tilted plane, rendered buffers as a random perturbation.
RandomPair random_pair(std::mt19937_64& rng, int W = 24, int H = 18) {
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N;
  RandomPair r;
  Frame& f = r.frame;
  f.K = Intrinsics{30, 30, (W - 1) / 2.0, (H - 1) / 2.0, W, H};
  f.color = ImageRGB(W, H);
  f.depth = ImageD(W, H, 0.0);
  f.mask = Mask(W, H, 0);
  r.buf.color = ImageRGB(W, H);
  r.buf.depth = ImageD(W, H, 0.0);
  r.buf.normal = ImageVec3(W, H, Vec3::Zero());
  r.buf.opacity = ImageD(W, H, 0.0);
  r.buf.confidence = ImageD(W, H, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const bool hit = U(rng) < 0.85;
      f.color(x, y) = Vec3(U(rng), U(rng), U(rng));
      if (hit) {
        f.depth(x, y) = 1.0 + 0.01 * x + 0.005 * y + 0.002 * U(rng);
        f.mask(x, y) = 1;
      }
      r.buf.color(x, y) = Vec3(U(rng), U(rng), U(rng));
      r.buf.opacity(x, y) = U(rng) < 0.1 ? 0.0 : 0.05 + 0.9 * U(rng);
      r.buf.depth(x, y) = r.buf.opacity(x, y) > 0 ? 1.0 + 0.01 * x + 0.005 * y + 0.02 * N(rng) : 0;
      r.buf.normal(x, y) =
          r.buf.opacity(x, y) > 0 ? Vec3(0.2 * N(rng), 0.2 * N(rng), -1).normalized() : Vec3::Zero();
    }
  }
  return r;
}

}  // namespace

TEST(KdTree, MatchesBruteForce) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.emplace_back(U(rng), U(rng), U(rng));
  // duplicates exercise the index tie-break
  pts.push_back(pts[10]);
  pts.push_back(pts[10]);
  const KdTree tree(pts);
  for (int q = 0; q < 200; ++q) {
    const Vec3 p = q < 3 ? pts[10] : Vec3(U(rng), U(rng), U(rng));
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - p).norm(), i);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(tree.nearest(p).distance, all[0].first);
    const auto k = tree.knn(p, 7);
    ASSERT_EQ(k.size(), 7u);
    for (int j = 0; j < 7; ++j) {
      EXPECT_EQ(k[j].index, all[j].second);
      EXPECT_EQ(k[j].distance, all[j].first);
    }
    const auto skipped = tree.knn(p, 3, all[0].second);
    EXPECT_EQ(skipped[0].index, all[1].second);
  }
  EXPECT_EQ(tree.knn(pts[0], 1000).size(), pts.size());
}

TEST(Ssim, IdenticalIsOneAndSymmetric) {
  std::mt19937_64 rng(31);
  auto r = random_pair(rng);
  EXPECT_NEAR(ssim(r.frame.color, r.frame.color), 1.0, 1e-12);
  EXPECT_NEAR(ssim(r.frame.color, r.buf.color), ssim(r.buf.color, r.frame.color), 1e-12);
  EXPECT_LT(ssim(r.frame.color, r.buf.color), 0.5);
}

TEST(Ssim, MatchesDirectWindowedSums) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 3; ++t) {
    auto r = random_pair(rng, 20 + t, 15);
    const ImageD map = ssim_map(r.frame.color, r.buf.color);
    double sum = 0;
    std::size_t n = 0;
    const Mask region = valid_region(r.frame);
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        const double ref = ref_ssim_pixel(r.frame.color, r.buf.color, x, y);
        ASSERT_NEAR(map(x, y), ref, 1e-9) << x << "," << y;
        if (region(x, y)) {
          sum += ref;
          ++n;
        }
      }
    }
    EXPECT_NEAR(ssim(r.frame.color, r.buf.color, &region), sum / n, 1e-9);
  }
}

TEST(MeanDepthError, ExamplesAndOracle) {
  std::mt19937_64 rng(33);
  auto r = random_pair(rng);
  const Mask region = valid_region(r.frame);
  ImageD ones(region.width(), region.height(), 1.0);
  EXPECT_EQ(mean_depth_error(r.frame.depth, r.frame.depth, region, ones), 0.0);
  ImageD shifted = r.frame.depth;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.01;
  EXPECT_NEAR(mean_depth_error(shifted, r.frame.depth, region, ones), 0.01, 1e-12);

  double sum = 0;
  int n = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (r.frame.mask[i] && r.frame.depth[i] > 0 && r.buf.opacity[i] > 1e-3) {
      sum += std::abs(r.buf.depth[i] - r.frame.depth[i]);
      ++n;
    }
  }
  EXPECT_NEAR(mean_depth_error(r.buf.depth, r.frame.depth, region, r.buf.opacity), sum / n, 1e-9);
}

TEST(Losses, EachTermMatchesDirectImplementation) {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 5; ++t) {
    auto r = random_pair(rng);
    const Frame& f = r.frame;
    const RenderBuffers& b = r.buf;
    SurfelModel model;
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < 6; ++i) {
      model.insert({make_surfel(Vec3(0, 0, 1), Quat::Identity(), Vec2(0.01, 0.01), U(rng),
                                Vec3::Constant(0.5))});
    }
    const LossTerms L = total_loss(f, b, model);

    const int W = f.depth.width(), H = f.depth.height();
    double l1 = 0, ssim_sum = 0, depth = 0, normal = 0, consistency = 0, bce = 0;
    int omega = 0;
    const NormalMap nobs = normals_from_depth(f.depth, f.K);
    const NormalMap nd = normals_from_depth(b.depth, f.K);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double o = std::min(std::max(b.opacity(x, y), 1e-6), 1 - 1e-6);
        bce += f.mask(x, y) ? -std::log(o) : -std::log(1 - o);
        if (!(f.mask(x, y) && f.depth(x, y) > 0)) continue;
        ++omega;
        const Vec3 d = f.color(x, y) - b.color(x, y);
        l1 += (std::abs(d.x()) + std::abs(d.y()) + std::abs(d.z())) / 3;
        ssim_sum += ref_ssim_pixel(f.color, b.color, x, y);
        if (b.opacity(x, y) <= 1e-3) continue;
        depth += std::abs(f.depth(x, y) - b.depth(x, y));
        if (nobs.valid(x, y)) {
          const Vec3 e = nobs.normals(x, y) - b.normal(x, y);
          normal += std::abs(e.x()) + std::abs(e.y()) + std::abs(e.z());
        }
        if (nd.valid(x, y)) consistency += std::abs(1 - nd.normals(x, y).dot(b.normal(x, y)));
      }
    }
    double lo = 0;
    for (const auto& s : model.surfels()) lo += std::exp(-(s.opacity - 0.5) * (s.opacity - 0.5) / 0.05);
    lo /= model.size();

    EXPECT_NEAR(L.l1, l1 / omega, 1e-9);
    EXPECT_NEAR(L.ssim, ssim_sum / omega, 1e-9);
    EXPECT_NEAR(L.depth, depth / omega, 1e-9);
    EXPECT_NEAR(L.normal, normal / omega, 1e-9);
    EXPECT_NEAR(L.consistency, consistency / omega, 1e-9);
    EXPECT_NEAR(L.mask, bce / (W * H), 1e-9);
    EXPECT_NEAR(L.opacity, lo, 1e-12);
    const double total = 0.8 * l1 / omega + 0.2 * (1 - ssim_sum / omega) + 0.8 * depth / omega +
                         0.1 * (normal + consistency) / omega + 0.1 * bce / (W * H) + 0.01 * lo;
    EXPECT_NEAR(L.total, total, 1e-9);
  }
}

TEST(Losses, PerfectReconstructionLeavesOnlyOpacityTerm) {
  const Intrinsics K{40, 40, 15.5, 11.5, 32, 24};
  const Scene plane(primitives::plane(5.0, 1.0));
  Frame f = capture(plane, Pose::identity(), K);
  // hole in the observation to exercise Ô = M = 0
  for (int y = 5; y < 9; ++y)
    for (int x = 5; x < 9; ++x) f.depth(x, y) = 0, f.mask(x, y) = 0;
  RenderBuffers b;
  b.color = f.color;
  b.depth = f.depth;
  b.opacity = ImageD(32, 24, 0.0);
  b.normal = ImageVec3(32, 24, Vec3::Zero());
  b.confidence = ImageD(32, 24, 0.0);
  const NormalMap n = normals_from_depth(f.depth, K);
  for (std::size_t i = 0; i < b.opacity.size(); ++i) {
    b.opacity[i] = f.mask[i];
    if (f.mask[i]) b.normal[i] = Vec3(0, 0, -1);
    // N_obs = N_d = N̂ where all three are defined
    if (n.valid[i]) ASSERT_LT((n.normals[i] - b.normal[i]).norm(), 1e-9);
  }
  SurfelModel model;
  model.insert({make_surfel(Vec3(0, 0, 1), Quat::Identity(), Vec2(1, 1), 1.0, Vec3::Zero()),
                make_surfel(Vec3(0, 0, 1), Quat::Identity(), Vec2(1, 1), 0.0, Vec3::Zero())});
  const LossTerms L = total_loss(f, b, model);
  EXPECT_NEAR(L.opacity, std::exp(-5.0), 1e-15);
  // the clamped BCE leaves about 1e-6 per pixel
  EXPECT_NEAR(L.total, 0.01 * std::exp(-5.0), 1e-6);
  EXPECT_NEAR(L.l1 + L.depth + L.normal + L.consistency, 0.0, 1e-9);
  EXPECT_NEAR(L.ssim, 1.0, 1e-12);
}

TEST(Losses, OpacityRegularizerPeaksAtHalf) {
  SurfelModel m;
  EXPECT_EQ(loss_opacity(m), 0.0);
  m.insert({make_surfel(Vec3::Zero(), Quat::Identity(), Vec2(1, 1), 0.5, Vec3::Zero())});
  EXPECT_EQ(loss_opacity(m), 1.0);
}

TEST(Losses, DefaultWeights) {
  const LossWeights w;
  EXPECT_EQ(w.l1, 0.8);
  EXPECT_EQ(w.dssim, 0.2);
  EXPECT_EQ(w.depth, 0.8);
  EXPECT_EQ(w.normal, 0.1);
  EXPECT_EQ(w.mask, 0.1);
  EXPECT_EQ(w.opacity, 0.01);
}

TEST(Losses, BufferGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(35);
  auto r = random_pair(rng, 16, 12);
  const SurfelModel model;
  const BufferGradients g = loss_buffer_gradients(r.frame, r.buf);
  auto loss = [&](const RenderBuffers& b) { return total_loss(r.frame, b, model).total; };
  const double h = 1e-6;
  std::uniform_int_distribution<int> X(0, 15), Y(0, 11);
  for (int t = 0; t < 40; ++t) {
    const int x = X(rng), y = Y(rng);
    if (r.buf.opacity(x, y) <= 0.0) continue;
    for (int c = 0; c < 3; ++c) {
      RenderBuffers p = r.buf, m = r.buf;
      p.color(x, y)[c] += h;
      m.color(x, y)[c] -= h;
      EXPECT_NEAR(g.color(x, y)[c], (loss(p) - loss(m)) / (2 * h), 1e-5) << "color " << x << "," << y;
      p = r.buf, m = r.buf;
      p.normal(x, y)[c] += h;
      m.normal(x, y)[c] -= h;
      EXPECT_NEAR(g.normal(x, y)[c], (loss(p) - loss(m)) / (2 * h), 1e-5) << "normal " << x << "," << y;
    }
    RenderBuffers p = r.buf, m = r.buf;
    p.depth(x, y) += h;
    m.depth(x, y) -= h;
    EXPECT_NEAR(g.depth(x, y), (loss(p) - loss(m)) / (2 * h), 1e-5) << "depth " << x << "," << y;
    p = r.buf, m = r.buf;
    p.opacity(x, y) += h;
    m.opacity(x, y) -= h;
    EXPECT_NEAR(g.opacity(x, y), (loss(p) - loss(m)) / (2 * h), 1e-5) << "opacity " << x << "," << y;
  }
}
