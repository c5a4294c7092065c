#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "surfelnbp/errors.hpp"
#include "surfelnbp/geometry.hpp"
#include "support/oracles.hpp"

using namespace surfelnbp;

namespace {

Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  return Quat(N(rng), N(rng), N(rng), N(rng)).normalized();
}

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-2, 2);
  return Pose(random_quat(rng), Vec3(U(rng), U(rng), U(rng)));
}

const Intrinsics kK{100, 100, 80, 60, 160, 120};

}  // namespace

TEST(QuatToRotation, IdentityQuaternion) {
  EXPECT_TRUE(quat_to_rotation(Quat::Identity()).isApprox(Mat3::Identity(), 1e-15));
}

TEST(QuatToRotation, NinetyDegreesAboutZMapsXToY) {
  const double h = std::numbers::pi / 4;
  const Mat3 R = quat_to_rotation(Quat(std::cos(h), 0, 0, std::sin(h)));
  EXPECT_NEAR((R * Vec3::UnitX() - Vec3::UnitY()).norm(), 0.0, 1e-12);
}

TEST(QuatToRotation, RandomIsOrthonormal) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Mat3 R = quat_to_rotation(random_quat(rng));
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-9);
    EXPECT_LT(std::abs(R.determinant() - 1.0), 1e-9);
    // against the hand-expanded formula
    EXPECT_LT((R - oracle::rot(Quat(R))).norm(), 1e-9);
  }
}

TEST(QuatToRotation, RenormalizesAndRejectsZero) {
  const Mat3 R = quat_to_rotation(Quat(2.0, 0, 0, 0));
  EXPECT_TRUE(R.isApprox(Mat3::Identity(), 1e-15));
  EXPECT_THROW(quat_to_rotation(Quat(0, 0, 0, 0)), InvalidArgument);
}

TEST(Project, OpticalAxisAndOffset) {
  EXPECT_TRUE(project(kK, Vec3(0, 0, 1)).isApprox(Vec2(80, 60)));
  EXPECT_TRUE(project(kK, Vec3(0.5, 0, 1)).isApprox(Vec2(130, 60)));
  EXPECT_THROW(project(kK, Vec3(0, 0, 0)), BehindCamera);
  EXPECT_THROW(project(kK, Vec3(0, 0, -1)), BehindCamera);
}

TEST(Backproject, PrincipalPointAndUnitTangent) {
  EXPECT_TRUE(backproject(kK, Vec2(80, 60), 2.0).isApprox(Vec3(0, 0, 2)));
  EXPECT_TRUE(backproject(kK, Vec2(180, 60), 1.0).isApprox(Vec3(1, 0, 1)));
  EXPECT_THROW(backproject(kK, Vec2(80, 60), 0.0), InvalidArgument);
  EXPECT_THROW(backproject(kK, Vec2(80, 60), -1.0), InvalidArgument);
}

TEST(Backproject, RandomRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0, 159), V(0, 119), D(0.1, 5);
  for (int i = 0; i < 100; ++i) {
    const Vec2 uv(U(rng), V(rng));
    const double d = D(rng);
    const Vec3 p = backproject(kK, uv, d);
    EXPECT_NEAR(p.z(), d, 1e-12);
    EXPECT_LT((project(kK, p) - uv).norm(), 1e-9);
    // direct formula
    EXPECT_NEAR(p.x(), (uv.x() - 80) / 100 * d, 1e-12);
  }
}

TEST(Pose, ComposeIdentityAndInverse) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Pose P = random_pose(rng);
    const Pose a = compose(Pose::identity(), P);
    EXPECT_LT(rotation_angle(a.rotation.conjugate() * P.rotation), 1e-9);
    EXPECT_LT((a.translation - P.translation).norm(), 1e-12);
    const Pose e = compose(P, inverse(P));
    EXPECT_LT(rotation_angle(e.rotation), 1e-9);
    EXPECT_LT(e.translation.norm(), 1e-9);
    EXPECT_NEAR(e.rotation.norm(), 1.0, 1e-9);
  }
}

TEST(Pose, Associativity) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const Pose l = compose(compose(a, b), c), r = compose(a, compose(b, c));
    EXPECT_LT(rotation_angle(l.rotation.conjugate() * r.rotation), 1e-9);
    EXPECT_LT((l.translation - r.translation).norm(), 1e-9);
    // composition acts on points like successive application
    const Vec3 p(0.3, -0.2, 0.7);
    EXPECT_LT((l.apply(p) - a.apply(b.apply(c.apply(p)))).norm(), 1e-9);
  }
}

TEST(Intrinsics, FromVerticalFov) {
  const Intrinsics K = Intrinsics::from_vertical_fov(160, 120, 90.0);
  EXPECT_NEAR(K.fy, 60.0, 1e-9);
  EXPECT_DOUBLE_EQ(K.fx, K.fy);
  EXPECT_NEAR(K.cx, 79.5, 1e-12);
  EXPECT_NEAR(K.cy, 59.5, 1e-12);
  EXPECT_THROW((Intrinsics{0, 1, 0, 0, 4, 4}.validate()), InvalidArgument);
  EXPECT_THROW((Intrinsics{1, 1, 5, 0, 4, 4}.validate()), InvalidArgument);
}

TEST(LookAt, OpticalAxisHitsTargetAndYPointsDown) {
  const Pose P = look_at(Vec3(1, 1, 1), Vec3::Zero());
  EXPECT_LT((P.forward() - Vec3(-1, -1, -1).normalized()).norm(), 1e-12);
  // image "down" (+y cam) has a negative world-z component
  EXPECT_LT((P.rotation * Vec3::UnitY()).z(), 0.0);
  // straight down along the up axis falls back to +x without NaNs
  const Pose Q = look_at(Vec3(0, 0, 2), Vec3::Zero());
  EXPECT_LT((Q.forward() + Vec3::UnitZ()).norm(), 1e-12);
  EXPECT_TRUE(Q.rotation.coeffs().allFinite());
}

TEST(QuatFromNormal, MapsZOntoNormal) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  for (int i = 0; i < 100; ++i) {
    const Vec3 n = Vec3(N(rng), N(rng), N(rng)).normalized();
    EXPECT_LT((quat_to_rotation(quat_from_normal(n)).col(2) - n).norm(), 1e-9);
  }
  EXPECT_LT((quat_to_rotation(quat_from_normal(-Vec3::UnitZ())).col(2) + Vec3::UnitZ()).norm(),
            1e-9);
}
