#include <gtest/gtest.h>

#include "actm_observer/lipschitz.hpp"
#include "fixtures.hpp"

using actm::LipschitzOptions;

namespace {

Eigen::Matrix3d stub_matrix() {
  Eigen::Matrix3d M;
  M << 0.8, -0.3, 0.1,
       0.2, 0.5, -0.4,
       0.0, 0.3, 0.6;
  return M;
}

}  // namespace

TEST(Lipschitz, LinearStubApproachesSpectralNorm) {
  const Eigen::Matrix3d M = stub_matrix();
  const double smax = Eigen::JacobiSVD<Eigen::Matrix3d>(M).singularValues()(0);
  auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return Eigen::VectorXd(M * x); };
  LipschitzOptions o;
  o.samples = 100000;
  const auto est = actm::estimate_lipschitz(f, 3, 0, 1.0, 1.0, o);
  EXPECT_LE(est.gamma, smax * (1 + 1e-12));
  EXPECT_GE(est.gamma, 0.98 * smax);
  EXPECT_EQ(est.pairs + est.skipped, o.samples);
}

TEST(Lipschitz, NondecreasingInSampleCount) {
  const Eigen::Matrix3d M = stub_matrix();
  auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return Eigen::VectorXd(M * x); };
  double prev = 0.0;
  for (std::size_t n : {10u, 100u, 1000u, 10000u}) {
    LipschitzOptions o;
    o.samples = n;
    const double g = actm::estimate_lipschitz(f, 3, 0, 1.0, 1.0, o).gamma;
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(Lipschitz, DeterministicForSeed) {
  const auto model = actm::HighwayModel(fixtures::reference_fd(), fixtures::reference_topology());
  LipschitzOptions o;
  o.samples = 2000;
  const std::vector<double> beta(10, 0.1);
  const auto a = actm::estimate_lipschitz(model, actm::LinearPart::kIdentity, beta, o);
  const auto b = actm::estimate_lipschitz(model, actm::LinearPart::kIdentity, beta, o);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_GT(a.gamma, 0.0);
}

TEST(Lipschitz, RejectsDegenerateDomain) {
  auto f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  LipschitzOptions o;
  EXPECT_THROW(actm::estimate_lipschitz(f, 2, 0, 0.0, 1.0, o), actm::ModelError);
  o.samples = 1;
  EXPECT_THROW(actm::estimate_lipschitz(f, 2, 0, 1.0, 1.0, o), actm::ModelError);
}
