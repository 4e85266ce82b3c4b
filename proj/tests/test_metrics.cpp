#include <cmath>

#include <gtest/gtest.h>

#include "actm_observer/metrics.hpp"

namespace {

actm::EstimationTrace make_trace(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xhat) {
  actm::EstimationTrace t;
  t.estimator = "test";
  t.x = x;
  t.xhat = xhat;
  t.y = Eigen::MatrixXd::Zero(1, x.cols());
  actm::finalize_trace(t, Eigen::MatrixXd::Identity(x.rows(), x.rows()));
  return t;
}

}  // namespace

TEST(Rmse, ZeroForPerfectEstimate) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 40);
  EXPECT_EQ(actm::rmse(make_trace(x, x)), 0.0);
}

TEST(Rmse, ConstantOffsetGivesNTimesOffset) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 50);
  const auto t = make_trace(x, x.array() + 0.125);
  EXPECT_NEAR(actm::rmse(t), 6 * 0.125, 1e-15);
  EXPECT_TRUE((actm::rmse_components(t).array() - 0.125).abs().maxCoeff() < 1e-15);
}

TEST(Rmse, PerComponentHandComputation) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 4);
  Eigen::MatrixXd xh(2, 4);
  xh << 1, -1, 1, -1,
        0, 0, 0, 2;
  const auto c = actm::rmse_components(make_trace(x, xh));
  EXPECT_DOUBLE_EQ(c(0), 1.0);
  EXPECT_DOUBLE_EQ(c(1), 1.0);  // sqrt(4/4)
}

TEST(Rmse, RejectsBadTraces) {
  actm::EstimationTrace t = make_trace(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3));
  t.xhat = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(actm::rmse(t), actm::ModelError);
  const auto empty = make_trace(Eigen::MatrixXd::Zero(2, 0), Eigen::MatrixXd::Zero(2, 0));
  EXPECT_THROW(actm::rmse(empty), actm::ModelError);
}

TEST(PerformanceNorm, ScalesWithZ) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 10);
  const Eigen::MatrixXd xh = Eigen::MatrixXd::Random(4, 10);
  actm::EstimationTrace t;
  t.x = x;
  t.xhat = xh;
  t.y = Eigen::MatrixXd::Zero(1, 10);
  actm::finalize_trace(t, 0.1 * Eigen::MatrixXd::Identity(4, 4));
  for (int k = 0; k < 10; ++k) {
    EXPECT_NEAR(t.output_norm(k), 0.1 * (x.col(k) - xh.col(k)).norm(), 1e-15);
    EXPECT_NEAR(t.error_norm(k), (x.col(k) - xh.col(k)).norm(), 1e-15);
  }
}

TEST(PerformanceNorm, ThresholdAndSettlingStep) {
  actm::EstimationTrace t;
  t.x = Eigen::MatrixXd::Zero(1, 6);
  t.xhat = Eigen::MatrixXd::Zero(1, 6);
  t.y = Eigen::MatrixXd::Zero(1, 6);
  t.error_norm = Eigen::VectorXd::Zero(6);
  t.output_norm.resize(6);
  t.output_norm << 1.0, 0.005, 0.02, 0.007, 0.001, 0.0072;
  const auto b = actm::performance_norm(t, 2.5092, 2.875e-3);
  EXPECT_NEAR(b.zeta, 7.21395e-3, 1e-8);
  ASSERT_TRUE(b.settles_at.has_value());
  EXPECT_EQ(*b.settles_at, 3);
  EXPECT_TRUE(b.holds_over_tail(0.5));
  EXPECT_FALSE(b.holds_over_tail(0.9));

  t.output_norm(5) = 1.0;
  EXPECT_FALSE(actm::performance_norm(t, 2.5092, 2.875e-3).settles_at.has_value());
  EXPECT_FALSE(actm::performance_norm(t, 2.5092, 2.875e-3).holds_over_tail(0.01));
}

TEST(PerformanceNorm, MissingMuIsAnError) {
  actm::EstimationTrace t;
  t.x = t.xhat = t.y = Eigen::MatrixXd::Zero(1, 2);
  t.error_norm = t.output_norm = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(actm::performance_norm(t, std::nan(""), 1.0), actm::ModelError);
  EXPECT_THROW(actm::performance_norm(t, -1.0, 1.0), actm::ModelError);
  EXPECT_THROW(actm::performance_norm(t, 1.0, std::nan("")), actm::ModelError);
}
