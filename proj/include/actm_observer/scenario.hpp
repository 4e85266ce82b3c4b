#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "actm_observer/actm.hpp"
#include "actm_observer/errors.hpp"
#include "actm_observer/ukf.hpp"

namespace actm {

struct NoiseConfig {
  double process_variance = 0.0;
  double measurement_variance = 1e-3;
  // Gaussian samples are redrawn until they fall within this many sigmas.
  double truncation = 3.0;
};

struct ObserverConfig {
  LinearPart linear_part = LinearPart::kFreeFlow;
  double gamma = 0.5;
  double alpha = 0.05;
  double mu1 = 1e4;
  double performance_weight = 0.1;  // Z = weight * I
  // Bisect gamma downward when the requested level is infeasible.
  bool gamma_backoff = true;
  // Initial estimate for every state; NaN means half the jam density.
  double initial_estimate = std::numeric_limits<double>::quiet_NaN();
};

struct UkfConfig {
  UnscentedParams ut;
  double process_noise = 1e-3;
  double measurement_noise = 1e-3;
  double initial_covariance = 1e-4;
};

struct Scenario {
  std::string name = "scenario";
  FundamentalDiagram fd;
  HighwayTopology topo;
  int horizon = 3000;
  std::uint64_t seed = 1;
  int input_hold = 60;
  double split_ratio = 0.1;
  NoiseConfig noise;
  ObserverConfig observer;
  UkfConfig ukf;

  HighwayModel model() const { return HighwayModel(fd, topo); }

  DisturbanceConfig disturbance() const {
    return {noise.process_variance, noise.measurement_variance};
  }

  std::vector<double> split_ratios() const {
    return std::vector<double>(topo.offramp_sections.size(), split_ratio);
  }

  double initial_estimate() const {
    return std::isnan(observer.initial_estimate) ? 0.5 * fd.jam_density : observer.initial_estimate;
  }

  void validate() const {
    fd.validate();
    topo.validate(fd);
    topo.sensor_states();
    if (horizon < 1) throw ModelError("horizon must be at least one step");
    if (input_hold < 1) throw ModelError("input_hold must be at least one step");
    if (!(split_ratio >= 0.0 && split_ratio < 1.0)) throw ModelError("split_ratio outside [0, 1)");
    if (!(noise.process_variance >= 0.0 && noise.measurement_variance >= 0.0))
      throw ModelError("noise variances must be nonnegative");
    if (!(noise.truncation > 0.0)) throw ModelError("noise truncation must be positive");
    if (!(observer.alpha > 0.0 && observer.alpha < 1.0)) throw ModelError("alpha outside (0, 1)");
    if (!(observer.gamma >= 0.0)) throw ModelError("gamma must be nonnegative");
    if (!(observer.mu1 > 0.0)) throw ModelError("mu1 must be positive");
    const double x0 = initial_estimate();
    if (!(x0 >= 0.0 && x0 <= fd.jam_density)) throw ModelError("initial estimate outside [0, jam]");
    if (!(ukf.process_noise >= 0.0 && ukf.measurement_noise > 0.0 && ukf.initial_covariance > 0.0))
      throw ModelError("ukf covariances must be positive");
  }
};

namespace detail {

inline Sensor sensor_from_state_index(const HighwayTopology& topo, int index) {
  // 1-based state index, in the stacked [sections | on-ramps | off-ramps] order
  const int n_on = topo.onramp_count();
  if (index >= 1 && index <= topo.sections) return {SensorSite::kSection, index};
  if (index > topo.sections && index <= topo.sections + n_on)
    return {SensorSite::kOnRamp, topo.onramp_sections[index - topo.sections - 1]};
  if (index > topo.sections + n_on && index <= topo.state_dim())
    return {SensorSite::kOffRamp, topo.offramp_sections[index - topo.sections - n_on - 1]};
  throw ModelError("sensor state index " + std::to_string(index) + " out of range");
}

inline const char* linear_part_name(LinearPart p) {
  return p == LinearPart::kIdentity ? "identity" : "free_flow";
}

inline LinearPart parse_linear_part(const std::string& s) {
  if (s == "identity") return LinearPart::kIdentity;
  if (s == "free_flow") return LinearPart::kFreeFlow;
  throw ParseError("linear_part must be \"identity\" or \"free_flow\", got \"" + s + "\"");
}

// Reads `key` into `out` when present; type errors become ParseError.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario key \"") + key + "\": " + e.what());
  }
}

}  // namespace detail

/// Parses the JSON scenario format documented in the README. Missing keys
/// keep their defaults; unknown keys are rejected.
inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");

  auto expect_keys = [](const nlohmann::json& obj, const char* where,
                        std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ParseError(std::string(where) + " must be an object");
    for (const auto& item : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || item.key() == a;
      if (!ok) throw ParseError(std::string("unknown key \"") + item.key() + "\" in " + where);
    }
  };
  expect_keys(j, "scenario",
              {"name", "fundamental_diagram", "topology", "horizon", "seed", "input_hold",
               "split_ratio", "noise", "observer", "ukf"});

  Scenario s;
  detail::read(j, "name", s.name);
  detail::read(j, "horizon", s.horizon);
  detail::read(j, "seed", s.seed);
  detail::read(j, "input_hold", s.input_hold);
  detail::read(j, "split_ratio", s.split_ratio);

  if (!j.contains("fundamental_diagram")) throw ParseError("scenario needs fundamental_diagram");
  const auto& f = j.at("fundamental_diagram");
  expect_keys(f, "fundamental_diagram",
              {"free_flow_speed", "wave_speed", "critical_density", "jam_density"});
  detail::read(f, "free_flow_speed", s.fd.free_flow_speed);
  detail::read(f, "wave_speed", s.fd.wave_speed);
  detail::read(f, "critical_density", s.fd.critical_density);
  detail::read(f, "jam_density", s.fd.jam_density);

  if (!j.contains("topology")) throw ParseError("scenario needs topology");
  const auto& t = j.at("topology");
  expect_keys(t, "topology",
              {"sections", "onramps", "offramps", "cell_length", "time_step", "onramp_occupancy",
               "sensors"});
  detail::read(t, "sections", s.topo.sections);
  detail::read(t, "onramps", s.topo.onramp_sections);
  detail::read(t, "offramps", s.topo.offramp_sections);
  detail::read(t, "cell_length", s.topo.cell_length);
  detail::read(t, "time_step", s.topo.time_step);
  detail::read(t, "onramp_occupancy", s.topo.onramp_occupancy);
  std::vector<int> sensor_indices;
  detail::read(t, "sensors", sensor_indices);

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    expect_keys(n, "noise", {"process_variance", "measurement_variance", "truncation"});
    detail::read(n, "process_variance", s.noise.process_variance);
    detail::read(n, "measurement_variance", s.noise.measurement_variance);
    detail::read(n, "truncation", s.noise.truncation);
  }
  if (j.contains("observer")) {
    const auto& o = j.at("observer");
    expect_keys(o, "observer",
                {"linear_part", "gamma", "alpha", "mu1", "performance_weight", "gamma_backoff",
                 "initial_estimate"});
    std::string lp = detail::linear_part_name(s.observer.linear_part);
    detail::read(o, "linear_part", lp);
    s.observer.linear_part = detail::parse_linear_part(lp);
    detail::read(o, "gamma", s.observer.gamma);
    detail::read(o, "alpha", s.observer.alpha);
    detail::read(o, "mu1", s.observer.mu1);
    detail::read(o, "performance_weight", s.observer.performance_weight);
    detail::read(o, "gamma_backoff", s.observer.gamma_backoff);
    detail::read(o, "initial_estimate", s.observer.initial_estimate);
  }
  if (j.contains("ukf")) {
    const auto& u = j.at("ukf");
    expect_keys(u, "ukf",
                {"alpha", "beta", "kappa", "process_noise", "measurement_noise",
                 "initial_covariance"});
    detail::read(u, "alpha", s.ukf.ut.alpha);
    detail::read(u, "beta", s.ukf.ut.beta);
    detail::read(u, "kappa", s.ukf.ut.kappa);
    detail::read(u, "process_noise", s.ukf.process_noise);
    detail::read(u, "measurement_noise", s.ukf.measurement_noise);
    detail::read(u, "initial_covariance", s.ukf.initial_covariance);
  }

  try {
    for (int idx : sensor_indices) s.topo.sensors.push_back(detail::sensor_from_state_index(s.topo, idx));
    s.validate();
  } catch (const ModelError& e) {
    throw ParseError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  std::vector<int> sensors;
  for (int idx : s.topo.sensor_states()) sensors.push_back(idx + 1);
  nlohmann::json j;
  j["name"] = s.name;
  j["fundamental_diagram"] = {{"free_flow_speed", s.fd.free_flow_speed},
                              {"wave_speed", s.fd.wave_speed},
                              {"critical_density", s.fd.critical_density},
                              {"jam_density", s.fd.jam_density}};
  j["topology"] = {{"sections", s.topo.sections},
                   {"onramps", s.topo.onramp_sections},
                   {"offramps", s.topo.offramp_sections},
                   {"cell_length", s.topo.cell_length},
                   {"time_step", s.topo.time_step},
                   {"onramp_occupancy", s.topo.onramp_occupancy},
                   {"sensors", sensors}};
  j["horizon"] = s.horizon;
  j["seed"] = s.seed;
  j["input_hold"] = s.input_hold;
  j["split_ratio"] = s.split_ratio;
  j["noise"] = {{"process_variance", s.noise.process_variance},
                {"measurement_variance", s.noise.measurement_variance},
                {"truncation", s.noise.truncation}};
  nlohmann::json obs = {{"linear_part", detail::linear_part_name(s.observer.linear_part)},
                        {"gamma", s.observer.gamma},
                        {"alpha", s.observer.alpha},
                        {"mu1", s.observer.mu1},
                        {"performance_weight", s.observer.performance_weight},
                        {"gamma_backoff", s.observer.gamma_backoff}};
  if (!std::isnan(s.observer.initial_estimate)) obs["initial_estimate"] = s.observer.initial_estimate;
  j["observer"] = obs;
  j["ukf"] = {{"alpha", s.ukf.ut.alpha},
              {"beta", s.ukf.ut.beta},
              {"kappa", s.ukf.ut.kappa},
              {"process_noise", s.ukf.process_noise},
              {"measurement_noise", s.ukf.measurement_noise},
              {"initial_covariance", s.ukf.initial_covariance}};
  return j;
}

/// Independent generator for one purpose ("inputs", "noise", ...) of a run.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

enum StreamTag : std::uint32_t { kInputStream = 1, kInitialStateStream = 2, kNoiseStream = 3 };

/// Piecewise-constant random inputs: every boundary and ramp flow is redrawn
/// uniformly from [0, capacity] every `hold` steps. Split ratios are constant.
inline std::vector<ExogenousInput> generate_inputs(const HighwayTopology& topo,
                                                   const FundamentalDiagram& fd, int horizon,
                                                   std::uint64_t seed, int hold = 60,
                                                   double split_ratio = 0.1) {
  if (horizon < 1) throw ModelError("horizon must be at least one step");
  if (hold < 1) throw ModelError("hold must be at least one step");
  auto rng = stream_rng(seed, kInputStream);
  std::uniform_real_distribution<double> flow(0.0, fd.capacity());

  std::vector<ExogenousInput> out;
  out.reserve(static_cast<std::size_t>(horizon));
  ExogenousInput cur;
  cur.onramp_demand.resize(topo.onramp_sections.size());
  cur.offramp_capacity.resize(topo.offramp_sections.size());
  cur.split_ratio.assign(topo.offramp_sections.size(), split_ratio);
  for (int k = 0; k < horizon; ++k) {
    if (k % hold == 0) {
      cur.upstream_demand = flow(rng);
      cur.downstream_supply = flow(rng);
      for (double& f : cur.onramp_demand) f = flow(rng);
      for (double& f : cur.offramp_capacity) f = flow(rng);
    }
    out.push_back(cur);
  }
  return out;
}

/// Uniform random plant state in [0, jam]^n.
inline Eigen::VectorXd random_state(int n, double jam, std::uint64_t seed) {
  auto rng = stream_rng(seed, kInitialStateStream);
  std::uniform_real_distribution<double> dist(0.0, jam);
  Eigen::VectorXd x(n);
  for (int k = 0; k < n; ++k) x(k) = dist(rng);
  return x;
}

struct NoisyMeasurements {
  Eigen::MatrixXd y;  // p x kf
  Eigen::MatrixXd w;  // realized noise, p x kf
  double w_linf = 0.0;  // max_k ||w[k]||
};

/// Adds i.i.d. zero-mean Gaussian noise of variance `r` to every sample,
/// truncated at +-`truncation` standard deviations by redrawing.
inline NoisyMeasurements inject_noise(const Eigen::MatrixXd& y_clean, double r, std::uint64_t seed,
                                      double truncation = 3.0) {
  if (!(r >= 0.0)) throw ModelError("measurement variance must be nonnegative");
  if (!(truncation > 0.0)) throw ModelError("truncation must be positive");
  NoisyMeasurements out;
  out.w = Eigen::MatrixXd::Zero(y_clean.rows(), y_clean.cols());
  if (r > 0.0) {
    auto rng = stream_rng(seed, kNoiseStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(r);
    for (Eigen::Index k = 0; k < y_clean.cols(); ++k)
      for (Eigen::Index i = 0; i < y_clean.rows(); ++i) {
        double z = normal(rng);
        while (std::abs(z) > truncation) z = normal(rng);
        out.w(i, k) = sd * z;
      }
  }
  out.y = y_clean + out.w;
  out.w_linf = out.w.cols() > 0 ? out.w.colwise().norm().maxCoeff() : 0.0;
  return out;
}

}  // namespace actm
