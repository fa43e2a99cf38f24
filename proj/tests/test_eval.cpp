#include <gtest/gtest.h>

#include <random>

#include "nrdepth/eval.hpp"
#include "oracles.hpp"

using namespace nrdepth;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  PointCloud c(n);
  for (auto& p : c) p = Vec3(u(rng), u(rng), 2.0 + u(rng));
  return c;
}

// Asymmetric surface patch so registration has a unique answer.
PointCloud body_like(std::size_t side) {
  PointCloud c;
  for (std::size_t j = 0; j < side; ++j)
    for (std::size_t i = 0; i < side; ++i) {
      const double x = -0.3 + 0.6 * i / (side - 1), y = -0.4 + 0.8 * j / (side - 1);
      c.emplace_back(x, y, 2.0 + 0.15 * std::exp(-8 * ((x - 0.1) * (x - 0.1) + y * y)) + 0.1 * x * y + 0.05 * y * y * y);
    }
  return c;
}

}  // namespace

TEST(KdTree, NearestMatchesBruteForce) {
  std::mt19937_64 rng(1);
  const auto cloud = random_cloud(rng, 700);
  const KdTree tree(cloud);
  for (const auto& q : random_cloud(rng, 300, 1.3)) {
    const auto hit = tree.nearest(q);
    EXPECT_EQ(std::sqrt(hit.squared_distance), oracle::brute_nearest(cloud, q));
  }
}

TEST(KdTree, DuplicatesResolveToLowerIndex) {
  const PointCloud cloud{Vec3(1, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(2, 2, 2)};
  EXPECT_EQ(KdTree(cloud).nearest(Vec3(0, 0, 0.1)).index, 1u);
}

TEST(Accuracy, SelfEvaluationIsPerfect) {
  std::mt19937_64 rng(2);
  const auto c = random_cloud(rng, 500);
  const auto r = accuracy_and_mae(c, c);
  EXPECT_EQ(r.accuracy, (std::vector<double>{100.0, 100.0, 100.0}));
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.points, 500u);
}

TEST(Accuracy, FrozenExample) {
  const PointCloud truth{Vec3(0, 0, 0)};
  const PointCloud result{Vec3(0.005, 0, 0), Vec3(0.015, 0, 0), Vec3(0.03, 0, 0), Vec3(0.05, 0, 0)};
  const auto r = accuracy_and_mae(result, truth);
  EXPECT_EQ(r.accuracy, (std::vector<double>{25.0, 50.0, 75.0}));
  EXPECT_NEAR(r.mae, 0.025, 1e-17);
}

TEST(Accuracy, ThresholdIsInclusive) {
  const PointCloud truth{Vec3(0, 0, 0)};
  const PointCloud result{Vec3(0.5, 0, 0)};
  EXPECT_EQ(accuracy_and_mae(result, truth, {0.5}).accuracy.front(), 100.0);
}

TEST(Accuracy, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  const auto truth = random_cloud(rng, 2000, 0.2);
  const auto result = random_cloud(rng, 1500, 0.2);
  const auto r = accuracy_and_mae(result, truth);
  long double sum = 0;
  std::array<std::size_t, 3> within{};
  for (const auto& p : result) {
    const double d = oracle::brute_nearest(truth, p);
    sum += d;
    for (int t = 0; t < 3; ++t) within[t] += d <= default_thresholds()[t];
  }
  EXPECT_EQ(r.mae, static_cast<double>(sum / result.size()));
  for (int t = 0; t < 3; ++t) EXPECT_EQ(r.accuracy[t], 100.0 * within[t] / result.size());
}

TEST(Accuracy, EmptyCloudsRejected) {
  EXPECT_THROW(accuracy_and_mae({}, {Vec3::Zero()}), InputError);
  EXPECT_THROW(icp_register({Vec3::Zero()}, {}), InputError);
}

TEST(Icp, RecoversInjectedTransform) {
  const auto truth = body_like(40);
  Vec3 c = Vec3::Zero();
  for (const auto& p : truth) c += p;
  c /= static_cast<double>(truth.size());
  // 15 degrees about the centroid plus a few centimeters.
  const Mat3 rot = Eigen::AngleAxisd(15.0 * M_PI / 180.0, Vec3(0.2, 1, 0.3).normalized()).toRotationMatrix();
  const RigidTransform g{rot, c - rot * c + Vec3(0.03, -0.02, 0.04)};
  // Result = truth moved by g^-1; registration must find g.
  const auto moved = transform_cloud(truth, g.inverse());
  const auto r = icp_register(moved, truth);
  EXPECT_LT(rotation_angle_between(r.transform.rotation, g.rotation), 1e-6);
  EXPECT_LT((r.transform.translation - g.translation).norm(), 1e-6);
  for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1] + 1e-18);
}

TEST(Icp, IdentityOnAlignedClouds) {
  const auto c = body_like(10);
  const auto r = icp_register(c, c);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(r.objective.front(), 1e-28);  // centroid start leaves only roundoff
}

TEST(Cloud, DepthToCloudCountsValidPixels) {
  const Intrinsics k{10, 10, 2, 2, 4, 4};
  DepthMap d(4, 4);
  d(1, 1) = 2.0;
  d(3, 0) = 1.0;
  const auto c = depth_to_cloud(d, k);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR((c[0] - Vec3(0.15, -0.15, 1.0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((c[1] - Vec3(-0.1, -0.1, 2.0)).norm(), 0.0, 1e-15);
}
