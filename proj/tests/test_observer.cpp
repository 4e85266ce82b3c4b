#include <gtest/gtest.h>

#include "actm_observer/observer.hpp"
#include "actm_observer/scenario.hpp"
#include "fixtures.hpp"

namespace {

struct Bench {
  actm::FundamentalDiagram fd = fixtures::reference_fd();
  actm::HighwayTopology topo = fixtures::reference_topology();
  actm::HighwayModel model{fd, topo};
  Eigen::MatrixXd C = model.measurement_matrix();
  std::vector<actm::ExogenousInput> inputs = actm::generate_inputs(topo, fd, 500, 7);
};

}  // namespace

TEST(Observer, ZeroInnovationFollowsOpenLoop) {
  Bench s;
  const int n = s.model.state_dim();
  Eigen::MatrixXd L = Eigen::MatrixXd::Constant(n, s.C.rows(), 0.3);
  Eigen::VectorXd x = actm::random_state(n, s.fd.jam_density, 3);
  auto obs = actm::make_observer(s.model, L, x);
  for (std::size_t k = 0; k < s.inputs.size(); ++k) {
    // measurement exactly matches the estimate, so the correction vanishes
    actm::observer_step(obs, s.C * obs.xhat, s.inputs[k], s.model, s.C);
    x = s.model.step(x, s.inputs[k]);
    ASSERT_LE((obs.xhat - x).cwiseAbs().maxCoeff(), 1e-15) << "step " << k;
  }
}

TEST(Observer, ZeroGainIgnoresMeasurements) {
  Bench s;
  const int n = s.model.state_dim();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 0.02);
  auto obs = actm::make_observer(s.model, Eigen::MatrixXd::Zero(n, s.C.rows()), x);
  const Eigen::VectorXd garbage = Eigen::VectorXd::Constant(s.C.rows(), 5.0);
  for (std::size_t k = 0; k < 100; ++k) {
    actm::observer_step(obs, garbage, s.inputs[k], s.model, s.C);
    x = s.model.step(x, s.inputs[k]);
  }
  EXPECT_EQ(obs.xhat, x);
  EXPECT_EQ(obs.clamped_steps, 0u);
}

TEST(Observer, MatchedStartWithoutNoiseStaysExact) {
  Bench s;
  const int n = s.model.state_dim();
  const Eigen::MatrixXd L = Eigen::MatrixXd::Constant(n, s.C.rows(), 0.05);
  Eigen::VectorXd x = actm::random_state(n, s.fd.jam_density, 11);
  auto obs = actm::make_observer(s.model, L, x);
  for (const auto& u : s.inputs) {
    actm::observer_step(obs, s.C * x, u, s.model, s.C);
    x = s.model.step(x, u);
  }
  EXPECT_LE((obs.xhat - x).norm(), 1e-14);
}

TEST(Observer, EstimateStaysInPhysicalRangeAndCountsClamps) {
  Bench s;
  const int n = s.model.state_dim();
  const Eigen::MatrixXd L = Eigen::MatrixXd::Constant(n, s.C.rows(), 10.0);
  auto obs = actm::make_observer(s.model, L, Eigen::VectorXd::Constant(n, 0.05));
  const Eigen::VectorXd high = Eigen::VectorXd::Constant(s.C.rows(), 1.0);
  actm::observer_step(obs, high, s.inputs[0], s.model, s.C);
  EXPECT_EQ(obs.clamped_steps, 1u);
  EXPECT_EQ(obs.clamped_entries, static_cast<std::size_t>(n));
  EXPECT_TRUE((obs.xhat.array() == s.fd.jam_density).all());
  actm::observer_step(obs, Eigen::VectorXd::Constant(s.C.rows(), -1.0), s.inputs[1], s.model, s.C);
  EXPECT_TRUE((obs.xhat.array() == 0.0).all());
  EXPECT_EQ(obs.clamped_steps, 2u);
}

TEST(Observer, RejectsMismatchedDimensions) {
  Bench s;
  const int n = s.model.state_dim();
  const auto p = s.C.rows();
  EXPECT_THROW(actm::make_observer(s.model, Eigen::MatrixXd::Zero(n, p + 1), Eigen::VectorXd::Zero(n)),
               actm::ModelError);
  EXPECT_THROW(actm::make_observer(s.model, Eigen::MatrixXd::Zero(n, p), Eigen::VectorXd::Zero(n - 1)),
               actm::ModelError);
  auto obs = actm::make_observer(s.model, Eigen::MatrixXd::Zero(n, p), Eigen::VectorXd::Zero(n));
  EXPECT_THROW(actm::observer_step(obs, Eigen::VectorXd::Zero(p - 1), s.inputs[0], s.model, s.C),
               actm::ModelError);
}

TEST(Observer, Deterministic) {
  Bench s;
  const int n = s.model.state_dim();
  const Eigen::MatrixXd L = Eigen::MatrixXd::Constant(n, s.C.rows(), 0.02);
  auto a = actm::make_observer(s.model, L, Eigen::VectorXd::Constant(n, 0.06));
  auto b = a;
  const Eigen::VectorXd x = actm::random_state(n, s.fd.jam_density, 5);
  for (const auto& u : s.inputs) {
    actm::observer_step(a, s.C * x, u, s.model, s.C);
    actm::observer_step(b, s.C * x, u, s.model, s.C);
  }
  EXPECT_EQ(a.xhat, b.xhat);
}
