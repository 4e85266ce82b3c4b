#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "actm_observer/scenario.hpp"

namespace {

const char* kMinimal = R"({
  "fundamental_diagram": {"free_flow_speed": 28.8889, "wave_speed": 6.6667,
                          "critical_density": 0.0249, "jam_density": 0.1333},
  "topology": {"sections": 2, "onramps": [1], "offramps": [2], "cell_length": 200,
               "time_step": 1, "sensors": [1, 3]}
})";

std::string with(const std::string& key, const std::string& value) {
  std::string s = kMinimal;
  s.insert(s.rfind('}'), ", \"" + key + "\": " + value);
  return s;
}

}  // namespace

TEST(Scenario, BundledFileParses) {
  const auto s = actm::load_scenario(ACTM_SCENARIO);
  EXPECT_EQ(s.topo.sections, 10);
  EXPECT_EQ(s.topo.state_dim(), 30);
  EXPECT_EQ(s.topo.sensors.size(), 13u);
  EXPECT_EQ(s.horizon, 3000);
  EXPECT_DOUBLE_EQ(s.fd.free_flow_speed, 28.8889);
  EXPECT_DOUBLE_EQ(s.noise.measurement_variance, 1e-3);
  EXPECT_DOUBLE_EQ(s.ukf.ut.kappa, -4.0);
  EXPECT_EQ(s.observer.linear_part, actm::LinearPart::kFreeFlow);
  const auto idx = s.topo.sensor_states();
  const std::vector<int> expected{2, 5, 10, 12, 14, 15, 17, 19, 21, 23, 26, 28, 30};
  ASSERT_EQ(idx.size(), expected.size());
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(idx[k] + 1, expected[k]);
}

TEST(Scenario, MinimalDocumentUsesDefaults) {
  const auto s = actm::parse_scenario(kMinimal);
  EXPECT_EQ(s.horizon, 3000);
  EXPECT_EQ(s.seed, 1u);
  EXPECT_DOUBLE_EQ(s.split_ratio, 0.1);
  EXPECT_DOUBLE_EQ(s.initial_estimate(), 0.5 * 0.1333);
  EXPECT_EQ(actm::parse_scenario(with("horizon", "1")).horizon, 1);
}

TEST(Scenario, RejectsBadDocuments) {
  EXPECT_THROW(actm::parse_scenario("{"), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario("[1, 2]"), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(with("horizn", "10")), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(with("horizon", "\"long\"")), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(with("horizon", "0")), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(with("split_ratio", "1.0")), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(with("observer", R"({"linear_part": "diagonal"})")), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(with("noise", R"({"variance": 1})")), actm::ParseError);
  EXPECT_THROW(actm::parse_scenario(R"({"topology": {"sections": 1}})"), actm::ParseError);
  std::string bad_sensor = kMinimal;
  bad_sensor.replace(bad_sensor.find("[1, 3]"), 6, "[1, 9]");
  EXPECT_THROW(actm::parse_scenario(bad_sensor), actm::ParseError);
  EXPECT_THROW(actm::load_scenario("/nonexistent/scenario.json"), actm::ParseError);
}

TEST(Scenario, JsonRoundTrip) {
  const auto s = actm::load_scenario(ACTM_SCENARIO);
  const auto back = actm::parse_scenario(actm::scenario_to_json(s).dump());
  EXPECT_EQ(actm::scenario_to_json(back), actm::scenario_to_json(s));
  EXPECT_EQ(back.topo.sensor_states(), s.topo.sensor_states());
}

TEST(Inputs, DeterministicPiecewiseConstantWithinCapacity) {
  const auto s = actm::load_scenario(ACTM_SCENARIO);
  const auto a = actm::generate_inputs(s.topo, s.fd, 3000, 4);
  const auto b = actm::generate_inputs(s.topo, s.fd, 3000, 4);
  const auto c = actm::generate_inputs(s.topo, s.fd, 3000, 5);
  ASSERT_EQ(a.size(), 3000u);
  int segments = 1;
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].upstream_demand, b[k].upstream_demand);
    EXPECT_EQ(a[k].onramp_demand, b[k].onramp_demand);
    differs = differs || a[k].upstream_demand != c[k].upstream_demand;
    if (k > 0 && a[k].upstream_demand != a[k - 1].upstream_demand) ++segments;
    for (double f : a[k].onramp_demand) EXPECT_TRUE(f >= 0.0 && f <= s.fd.capacity());
    for (double f : a[k].offramp_capacity) EXPECT_TRUE(f >= 0.0 && f <= s.fd.capacity());
    EXPECT_TRUE(a[k].downstream_supply >= 0.0 && a[k].downstream_supply <= 0.7193);
    for (double beta : a[k].split_ratio) EXPECT_EQ(beta, 0.1);
    if (k % 60 != 0) EXPECT_EQ(a[k].offramp_capacity, a[k - 1].offramp_capacity);
  }
  EXPECT_EQ(segments, 50);
  EXPECT_TRUE(differs);
  EXPECT_NEAR(s.fd.capacity(), 0.7193, 1e-4);
}

TEST(Noise, ZeroVarianceIsIdentity) {
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(13, 100);
  const auto m = actm::inject_noise(y, 0.0, 1);
  EXPECT_EQ(m.y, y);
  EXPECT_EQ(m.w_linf, 0.0);
}

TEST(Noise, TruncatedAndReproducible) {
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(13, 3000);
  const auto a = actm::inject_noise(y, 1e-3, 9);
  const auto b = actm::inject_noise(y, 1e-3, 9);
  EXPECT_EQ(a.y, b.y);
  const double sd = std::sqrt(1e-3);
  EXPECT_LE(a.w.cwiseAbs().maxCoeff(), 3 * sd);
  // per-step bound 3 sqrt(p r)
  EXPECT_LE(a.w_linf, 3 * std::sqrt(13 * 1e-3));
  EXPECT_NEAR(3 * std::sqrt(13 * 1e-3), 0.342, 1e-3);
  // sample variance of a 3-sigma truncated normal is 0.9733 r
  const double var = a.w.array().square().mean();
  EXPECT_NEAR(var / 1e-3, 0.9733, 0.02);
  EXPECT_NEAR(a.w.mean(), 0.0, 5e-4);
  EXPECT_THROW(actm::inject_noise(y, -1.0, 1), actm::ModelError);
}

TEST(RandomState, InsideDomain) {
  const auto x = actm::random_state(30, 0.1333, 2);
  EXPECT_TRUE((x.array() >= 0.0).all() && (x.array() <= 0.1333).all());
  EXPECT_EQ(x, actm::random_state(30, 0.1333, 2));
  EXPECT_NE(x, actm::random_state(30, 0.1333, 3));
}
