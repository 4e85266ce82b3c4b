#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "actm_observer/actm.hpp"
#include "actm_observer/metrics.hpp"
#include "actm_observer/observer.hpp"
#include "actm_observer/report.hpp"
#include "actm_observer/scenario.hpp"
#include "actm_observer/synthesis.hpp"
#include "actm_observer/ukf.hpp"

namespace actm {

/// 64-bit FNV-1a over raw bytes.
class Fnv1a {
 public:
  void add(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(const Eigen::MatrixXd& M) {
    const Eigen::Index dims[2] = {M.rows(), M.cols()};
    add(dims, sizeof dims);
    add(M.data(), sizeof(double) * static_cast<std::size_t>(M.size()));
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t digest(const Eigen::MatrixXd& M) {
  Fnv1a h;
  h.add(M);
  return h.value();
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// One plant simulation with its measurement stream; both estimators consume
/// this unchanged.
struct PlantRun {
  std::vector<ExogenousInput> inputs;
  Eigen::MatrixXd x;        // n x kf
  Eigen::MatrixXd y_clean;  // p x kf
  Eigen::MatrixXd y;        // p x kf
  Eigen::MatrixXd w;        // stacked [process; measurement] disturbance, per step
  double w_linf = 0.0;
  std::uint64_t measurement_digest = 0;
};

/// x[k+1] = step(x[k], u[k]) (+ truncated process noise), y[k] = C x[k] + v[k].
inline PlantRun simulate_plant(const Scenario& s, const HighwayModel& model,
                               const Eigen::VectorXd& x0) {
  const int n = model.state_dim();
  const int kf = s.horizon;
  const Eigen::MatrixXd C = model.measurement_matrix();
  if (x0.size() != n) throw ModelError("initial plant state has wrong dimension");

  PlantRun run;
  run.inputs = generate_inputs(s.topo, s.fd, kf, s.seed, s.input_hold, s.split_ratio);
  // Process noise uses its own stream so toggling it leaves measurement noise unchanged.
  const NoisyMeasurements proc =
      inject_noise(Eigen::MatrixXd::Zero(n, kf), s.noise.process_variance, s.seed ^ 0x9e3779b97f4a7c15ULL,
                   s.noise.truncation);
  run.x.resize(n, kf);
  run.x.col(0) = model.clamp(x0);
  for (int k = 0; k + 1 < kf; ++k) {
    Eigen::VectorXd next = model.step(run.x.col(k), run.inputs[static_cast<std::size_t>(k)]);
    if (s.noise.process_variance > 0.0) next = model.clamp(next + proc.w.col(k));
    run.x.col(k + 1) = next;
  }
  run.y_clean = C * run.x;
  const NoisyMeasurements meas =
      inject_noise(run.y_clean, s.noise.measurement_variance, s.seed, s.noise.truncation);
  run.y = meas.y;
  run.w.resize(n + C.rows(), kf);
  run.w.topRows(n) = proc.w;
  run.w.bottomRows(C.rows()) = meas.w;
  run.w_linf = kf > 0 ? run.w.colwise().norm().maxCoeff() : 0.0;
  run.measurement_digest = digest(run.y);
  return run;
}

inline PlantRun simulate_plant(const Scenario& s, const HighwayModel& model) {
  return simulate_plant(s, model, random_state(model.state_dim(), s.fd.jam_density, s.seed));
}

/// Design problem described by a scenario.
inline SynthesisProblem synthesis_problem(const Scenario& s, const HighwayModel& model) {
  const SystemMatrices sys = model.assemble_system(s.observer.linear_part, s.split_ratios(), s.disturbance());
  SynthesisProblem prob;
  prob.A = sys.A;
  prob.C = sys.C;
  prob.Bw = sys.Bw;
  prob.Dw = sys.Dw;
  const Eigen::Index n = sys.A.rows();
  prob.Z = s.observer.performance_weight * Eigen::MatrixXd::Identity(n, n);
  prob.gamma = s.observer.gamma;
  prob.alpha = s.observer.alpha;
  prob.mu1 = s.observer.mu1;
  return prob;
}

/// Synthesizes the gain for a scenario, backing gamma off when the scenario
/// allows it.
inline SynthesisReport design_observer(const Scenario& s, const HighwayModel& model,
                                       const SynthesisOptions& opts = {}) {
  const SynthesisProblem prob = synthesis_problem(s, model);
  SynthesisReport rep;
  rep.gamma_requested = prob.gamma;
  rep.linear_part = detail::linear_part_name(s.observer.linear_part);
  if (s.observer.gamma_backoff) {
    rep.result = solve_with_gamma_backoff(prob, opts).result;
  } else {
    rep.result = solve(prob, opts);
  }
  return rep;
}

namespace detail {

inline EstimationTrace start_trace(const char* name, const PlantRun& run) {
  EstimationTrace t;
  t.estimator = name;
  t.x = run.x;
  t.y = run.y;
  t.xhat = Eigen::MatrixXd::Zero(run.x.rows(), run.x.cols());
  t.measurement_digest = digest(run.y);
  return t;
}

}  // namespace detail

/// Runs the Luenberger-type observer over a plant run. The timer covers the
/// estimation loop only.
inline EstimationTrace run_observer(const HighwayModel& model, const PlantRun& run,
                                    const Eigen::MatrixXd& L, const Eigen::VectorXd& xhat0,
                                    const Eigen::MatrixXd& Z, std::size_t* clamped_steps = nullptr) {
  EstimationTrace t = detail::start_trace("observer", run);
  const Eigen::MatrixXd C = model.measurement_matrix();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ObserverState obs = make_observer(model, L, xhat0);
    for (Eigen::Index k = 0; k < run.x.cols(); ++k) {
      t.xhat.col(k) = obs.xhat;
      if (k + 1 < run.x.cols())
        observer_step(obs, run.y.col(k), run.inputs[static_cast<std::size_t>(k)], model, C);
    }
    if (clamped_steps) *clamped_steps = obs.clamped_steps;
  } catch (const std::exception& e) {
    t.failure = e.what();
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_trace(t, Z);
  return t;
}

struct UkfCounters {
  std::size_t covariance_repairs = 0;
  std::size_t clamped_steps = 0;
};

/// Runs the UKF over a plant run with the scenario's filter settings.
inline EstimationTrace run_ukf(const HighwayModel& model, const PlantRun& run, const UkfConfig& cfg,
                               const Eigen::VectorXd& xhat0, const Eigen::MatrixXd& Z,
                               UkfCounters* counters = nullptr) {
  EstimationTrace t = detail::start_trace("ukf", run);
  const Eigen::MatrixXd C = model.measurement_matrix();
  const Eigen::Index n = run.x.rows(), p = C.rows();
  const auto t0 = std::chrono::steady_clock::now();
  UkfState s;
  try {
    s.xhat = model.clamp(xhat0);
    s.P = cfg.initial_covariance * Eigen::MatrixXd::Identity(n, n);
    s.Q = cfg.process_noise * Eigen::MatrixXd::Identity(n, n);
    s.R = cfg.measurement_noise * Eigen::MatrixXd::Identity(p, p);
    s.ut = cfg.ut;
    s.bounds = std::make_pair(0.0, model.fd().jam_density);
    for (Eigen::Index k = 0; k < run.x.cols(); ++k) {
      t.xhat.col(k) = s.xhat;
      if (k + 1 < run.x.cols()) {
        const ExogenousInput& u = run.inputs[static_cast<std::size_t>(k)];
        ukf_step(s, run.y.col(k), C, [&](const Eigen::VectorXd& x) { return model.step(x, u); });
      }
    }
  } catch (const std::exception& e) {
    t.failure = e.what();
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (counters) *counters = {s.covariance_repairs, s.clamped_steps};
  finalize_trace(t, Z);
  return t;
}

struct ExperimentReport {
  std::string scenario;
  std::uint64_t seed = 0;
  int horizon = 0;
  std::string measurement_digest;
  EstimationTrace observer;
  EstimationTrace ukf;
  double rmse_observer = 0.0;
  double rmse_ukf = 0.0;
  double mu = 0.0;
  double gamma = 0.0;
  double gamma_requested = 0.0;
  double w_linf = 0.0;
  double zeta = 0.0;
  std::optional<Eigen::Index> settles_at;  // first step from which ||z|| <= zeta
  std::size_t observer_clamped_steps = 0;
  std::size_t ukf_covariance_repairs = 0;
  std::size_t ukf_clamped_steps = 0;
};

/// Simulates the plant once and runs both estimators on the same stream.
inline ExperimentReport run_experiment(const Scenario& s, const SynthesisReport& design) {
  s.validate();
  const HighwayModel model = s.model();
  const PlantRun run = simulate_plant(s, model);
  const Eigen::Index n = model.state_dim();
  const Eigen::VectorXd xhat0 = Eigen::VectorXd::Constant(n, s.initial_estimate());
  const Eigen::MatrixXd Z = s.observer.performance_weight * Eigen::MatrixXd::Identity(n, n);

  ExperimentReport rep;
  rep.scenario = s.name;
  rep.seed = s.seed;
  rep.horizon = s.horizon;
  rep.measurement_digest = hex64(run.measurement_digest);
  rep.observer = run_observer(model, run, design.result.L, xhat0, Z, &rep.observer_clamped_steps);
  UkfCounters uc;
  rep.ukf = run_ukf(model, run, s.ukf, xhat0, Z, &uc);
  rep.ukf_covariance_repairs = uc.covariance_repairs;
  rep.ukf_clamped_steps = uc.clamped_steps;
  rep.rmse_observer = rmse(rep.observer);
  rep.rmse_ukf = rmse(rep.ukf);
  rep.mu = design.result.mu;
  rep.gamma = design.result.gamma;
  rep.gamma_requested = design.gamma_requested;
  rep.w_linf = run.w_linf;
  const PerformanceBound b = performance_norm(rep.observer, rep.mu, rep.w_linf);
  rep.zeta = b.zeta;
  rep.settles_at = b.settles_at;
  return rep;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(M.cols()));
    for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
    rows.push_back(r);
  }
  return nlohmann::json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", rows}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd M(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw ParseError("matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = data.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(r.size()) != cols) throw ParseError("matrix column count mismatch");
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) M(i, j2) = r.at(static_cast<std::size_t>(j2)).get<double>();
  }
  return M;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json trace_to_json(const EstimationTrace& t) {
  return {{"estimator", t.estimator},
          {"seconds", t.seconds},
          {"measurement_digest", hex64(t.measurement_digest)},
          {"failure", t.failure},
          {"x", matrix_to_json(t.x)},
          {"xhat", matrix_to_json(t.xhat)},
          {"y", matrix_to_json(t.y)},
          {"error_norm", std::vector<double>(t.error_norm.data(), t.error_norm.data() + t.error_norm.size())},
          {"output_norm",
           std::vector<double>(t.output_norm.data(), t.output_norm.data() + t.output_norm.size())}};
}

inline EstimationTrace trace_from_json(const nlohmann::json& j) {
  EstimationTrace t;
  t.estimator = j.at("estimator").get<std::string>();
  t.seconds = j.at("seconds").get<double>();
  t.measurement_digest = std::stoull(j.at("measurement_digest").get<std::string>(), nullptr, 16);
  t.failure = j.at("failure").get<std::string>();
  t.x = matrix_from_json(j.at("x"));
  t.xhat = matrix_from_json(j.at("xhat"));
  t.y = matrix_from_json(j.at("y"));
  t.error_norm = vector_from_json(j.at("error_norm"));
  t.output_norm = vector_from_json(j.at("output_norm"));
  t.validate();
  return t;
}

}  // namespace detail

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["horizon"] = r.horizon;
  j["measurement_digest"] = r.measurement_digest;
  j["rmse"] = {{"observer", r.rmse_observer}, {"ukf", r.rmse_ukf}};
  j["seconds"] = {{"observer", r.observer.seconds}, {"ukf", r.ukf.seconds}};
  j["mu"] = r.mu;
  j["gamma"] = r.gamma;
  j["gamma_requested"] = r.gamma_requested;
  j["w_linf"] = r.w_linf;
  j["zeta"] = r.zeta;
  j["settles_at"] = r.settles_at ? nlohmann::json(*r.settles_at) : nlohmann::json(nullptr);
  j["observer_clamped_steps"] = r.observer_clamped_steps;
  j["ukf_covariance_repairs"] = r.ukf_covariance_repairs;
  j["ukf_clamped_steps"] = r.ukf_clamped_steps;
  j["observer"] = detail::trace_to_json(r.observer);
  j["ukf"] = detail::trace_to_json(r.ukf);
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  try {
    ExperimentReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.horizon = j.at("horizon").get<int>();
    r.measurement_digest = j.at("measurement_digest").get<std::string>();
    r.rmse_observer = j.at("rmse").at("observer").get<double>();
    r.rmse_ukf = j.at("rmse").at("ukf").get<double>();
    r.mu = j.at("mu").get<double>();
    r.gamma = j.at("gamma").get<double>();
    r.gamma_requested = j.at("gamma_requested").get<double>();
    r.w_linf = j.at("w_linf").get<double>();
    r.zeta = j.at("zeta").get<double>();
    if (!j.at("settles_at").is_null()) r.settles_at = j.at("settles_at").get<Eigen::Index>();
    r.observer_clamped_steps = j.at("observer_clamped_steps").get<std::size_t>();
    r.ukf_covariance_repairs = j.at("ukf_covariance_repairs").get<std::size_t>();
    r.ukf_clamped_steps = j.at("ukf_clamped_steps").get<std::size_t>();
    r.observer = detail::trace_from_json(j.at("observer"));
    r.ukf = detail::trace_from_json(j.at("ukf"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("experiment report: ") + e.what());
  }
}

/// Per-step CSV: k, x_1..x_n, xhat_1..xhat_n, ||e||, ||z||.
inline void write_trace_csv(std::ostream& os, const EstimationTrace& t) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Eigen::Index n = t.x.rows();
  os << "k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",xhat" << i;
  os << ",error_norm,output_norm\n";
  for (Eigen::Index k = 0; k < t.steps(); ++k) {
    os << k;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << t.x(i, k);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << t.xhat(i, k);
    os << ',' << t.error_norm(k) << ',' << t.output_norm(k) << '\n';
  }
}

/// Performance output against its bound: k, ||z|| observer, ||z|| ukf, zeta.
inline void write_performance_csv(std::ostream& os, const ExperimentReport& r) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "k,z_norm_observer,z_norm_ukf,zeta\n";
  for (Eigen::Index k = 0; k < r.observer.steps(); ++k)
    os << k << ',' << r.observer.output_norm(k) << ',' << r.ukf.output_norm(k) << ',' << r.zeta << '\n';
}

/// Densities: k, then true / observer / ukf for every state.
inline void write_density_csv(std::ostream& os, const ExperimentReport& r) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Eigen::Index n = r.observer.x.rows();
  os << "k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i << ",observer" << i << ",ukf" << i;
  os << '\n';
  for (Eigen::Index k = 0; k < r.observer.steps(); ++k) {
    os << k;
    for (Eigen::Index i = 0; i < n; ++i)
      os << ',' << r.observer.x(i, k) << ',' << r.observer.xhat(i, k) << ',' << r.ukf.xhat(i, k);
    os << '\n';
  }
}

/// Table of RMSE and wall time per estimator, with per-component RMSE.
inline void write_summary_csv(std::ostream& os, const ExperimentReport& r) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "estimator,rmse,seconds,failure\n";
  os << "observer," << r.rmse_observer << ',' << r.observer.seconds << ',' << r.observer.failure << '\n';
  os << "ukf," << r.rmse_ukf << ',' << r.ukf.seconds << ',' << r.ukf.failure << '\n';
}

inline void write_component_rmse_csv(std::ostream& os, const ExperimentReport& r) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Eigen::VectorXd a = rmse_components(r.observer), b = rmse_components(r.ukf);
  os << "state,rmse_observer,rmse_ukf\n";
  for (Eigen::Index i = 0; i < a.size(); ++i) os << i + 1 << ',' << a(i) << ',' << b(i) << '\n';
}

}  // namespace actm
