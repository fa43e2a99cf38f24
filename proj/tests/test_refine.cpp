#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "nrdepth/refine.hpp"

using namespace nrdepth;

TEST(DetailMap, ZeroRawIsZeroOffset) {
  const DetailMap d(4, 3);
  const auto off = d.offsets();
  for (double v : off.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(d.bound(), 0.1);
}

TEST(DetailMap, OffsetStaysStrictlyInsideBound) {
  const DetailMap d(1, 1, 0.1);
  for (double raw : {-30.0, -5.0, 0.3, 5.0, 30.0}) {
    EXPECT_LT(std::abs(d.offset_of(raw)), 0.1);
    EXPECT_GT(d.slope_of(raw), 0.0);
  }
  EXPECT_NEAR(d.offset_of(std::log(3.0)), 0.05, 1e-15);  // sigmoid = 3/4
  EXPECT_NEAR(d.slope_of(0.0), 0.05, 1e-15);
}

TEST(ZeroMedian, EvenCountUsesMiddlePairMean) {
  DepthMap d(3, 2);
  d(0, 0) = 4.0;
  d(1, 0) = 1.0;
  d(2, 0) = 3.0;
  d(0, 1) = 2.0;  // (1,1) and (2,1) stay invalid
  const auto z = zero_median_normalize(d);
  EXPECT_EQ(z(0, 0), 1.5);
  EXPECT_EQ(z(1, 0), -1.5);
  EXPECT_EQ(z(2, 0), 0.5);
  EXPECT_EQ(z(0, 1), -0.5);
  EXPECT_FALSE(z.valid(1, 1));
}

TEST(Optimize, ZeroIterationBudgetReturnsZeroDetail) {
  const auto t = fixture::random_tuple(1, 16, 16, 2);
  OptimizerConfig cfg;
  cfg.iterations = 0;
  const auto r = optimize_detail(t, cfg);
  const auto off = r.detail.offsets();
  for (double v : off.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.best_iteration, 0u);
}

TEST(Optimize, DeterministicAndMonotoneInBest) {
  const auto t = fixture::random_tuple(2, 20, 20, 3);
  OptimizerConfig cfg;
  cfg.iterations = 25;
  const auto a = optimize_detail(t, cfg);
  const auto b = optimize_detail(t, cfg);
  EXPECT_EQ(a.detail, b.detail);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].total, b.trace[i].total);
  for (const auto& l : a.trace) EXPECT_LE(a.best.total, l.total);
  EXPECT_LT(a.best.total, a.trace.front().total);
  EXPECT_EQ(total_loss(t, a.detail.offsets()).total, a.best.total);
}

TEST(Optimize, StopsEarlyWhenConverged) {
  // Identical images with identity motion: the loss is already 0 and stays flat.
  auto t = fixture::random_tuple(3, 12, 12, 2);
  for (auto& r : t.references) {
    r.image = t.target_image;
    for (auto& tr : r.motion.transforms.values()) tr = RigidTransform::identity();
  }
  OptimizerConfig cfg;
  cfg.iterations = 300;
  cfg.convergence_window = 5;
  const auto r = optimize_detail(t, cfg);
  EXPECT_LT(r.trace.size(), 10u);
  const auto off = r.detail.offsets();
  for (double v : off.values()) EXPECT_LT(std::abs(v), 1e-6);
}

TEST(Optimize, NonFiniteInputIsANumericalFailure) {
  auto t = fixture::random_tuple(4, 12, 12, 2);
  for (auto& v : t.references[0].image.channel(0).values()) v = std::nan("");
  OptimizerConfig cfg;
  cfg.iterations = 3;
  EXPECT_THROW(optimize_detail(t, cfg), NumericalError);
}

TEST(Optimize, RejectsBadConfig) {
  const auto t = fixture::random_tuple(5, 8, 8, 2);
  OptimizerConfig cfg;
  cfg.step_size = 0.0;
  EXPECT_THROW(optimize_detail(t, cfg), InputError);
  cfg = {};
  cfg.iterations = -1;
  EXPECT_THROW(optimize_detail(t, cfg), InputError);
  const DetailMap wrong(3, 3);
  EXPECT_THROW(optimize_detail(t, {}, {}, &wrong), InputError);
}

TEST(Predictor, DirectOptimizationMatchesOptimizer) {
  const auto t = fixture::random_tuple(6, 12, 12, 2);
  OptimizerConfig cfg;
  cfg.iterations = 5;
  DirectOptimizationPredictor p(cfg);
  DetailPredictor& base = p;
  EXPECT_EQ(base.predict(t), optimize_detail(t, cfg).detail);
  const auto in = predictor_input(t);
  EXPECT_EQ(in.image, t.target_image);
  EXPECT_EQ(in.zero_median_depth.width(), t.width());
}
