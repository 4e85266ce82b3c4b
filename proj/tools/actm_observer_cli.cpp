// Command-line front end: simulate, synthesize, estimate, compare, lipschitz.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "actm_observer/experiment.hpp"
#include "actm_observer/lipschitz.hpp"
#include "actm_observer/report.hpp"
#include "actm_observer/scenario.hpp"

namespace fs = std::filesystem;
using namespace actm;

namespace {

enum ExitCode { kOk = 0, kParse = 2, kInfeasible = 3, kRuntime = 4 };

struct Options {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> horizon;
  std::optional<double> alpha, gamma, mu1, noise_r;
  bool quiet = false;
  // subcommand specific
  std::string estimator = "observer";
  std::string gain;
  std::size_t samples = 100000;
};

std::string default_out_dir() {
  const char* env = std::getenv("ACTM_OUT_DIR");
  return env && *env ? env : "out";
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory (default: $ACTM_OUT_DIR or ./out)");
  cmd->add_option("--seed", o.seed, "Override the scenario seed");
  cmd->add_option("--horizon", o.horizon, "Override the number of steps");
  cmd->add_option("--alpha", o.alpha, "Override the decay parameter alpha in (0, 1)");
  cmd->add_option("--gamma", o.gamma, "Override the Lipschitz level gamma");
  cmd->add_option("--mu1", o.mu1, "Override mu1");
  cmd->add_option("--noise-r", o.noise_r, "Override the measurement noise variance");
  cmd->add_flag("--quiet", o.quiet, "Print nothing on success");
}

Scenario load(const Options& o) {
  Scenario s = load_scenario(o.scenario);
  if (o.seed) s.seed = *o.seed;
  if (o.horizon) s.horizon = *o.horizon;
  if (o.alpha) s.observer.alpha = *o.alpha;
  if (o.gamma) s.observer.gamma = *o.gamma;
  if (o.mu1) s.observer.mu1 = *o.mu1;
  if (o.noise_r) s.noise.measurement_variance = *o.noise_r;
  try {
    s.validate();
  } catch (const ModelError& e) {
    throw ParseError(std::string("override rejected: ") + e.what());
  }
  return s;
}

fs::path prepare_out(const Options& o) {
  const fs::path dir = o.out.empty() ? default_out_dir() : o.out;
  fs::create_directories(dir);
  return dir;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  writer(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void print_synthesis(const SynthesisReport& rep) {
  const auto& r = rep.result;
  std::cout << "gamma " << r.gamma << " (requested " << rep.gamma_requested << "), alpha " << r.alpha
            << ", mu1 " << r.mu1 << "\n"
            << "mu " << r.mu << "  mu0 " << r.mu0 << "  mu2 " << r.mu2 << "  eps " << r.epsilon << "\n"
            << "residuals " << r.residual_stability << " " << r.residual_performance << "  cond(P) "
            << r.p_condition << (r.ill_conditioned ? " (ill-conditioned)" : "") << "\n";
}

int cmd_simulate(const Options& o) {
  const Scenario s = load(o);
  const HighwayModel model = s.model();
  const PlantRun run = simulate_plant(s, model);
  const fs::path dir = prepare_out(o);
  write_file(dir / "densities.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "k";
    for (Eigen::Index i = 1; i <= run.x.rows(); ++i) os << ",x" << i;
    os << '\n';
    for (Eigen::Index k = 0; k < run.x.cols(); ++k) {
      os << k;
      for (Eigen::Index i = 0; i < run.x.rows(); ++i) os << ',' << run.x(i, k);
      os << '\n';
    }
  });
  write_file(dir / "measurements.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "k";
    for (Eigen::Index i = 1; i <= run.y.rows(); ++i) os << ",y" << i;
    os << '\n';
    for (Eigen::Index k = 0; k < run.y.cols(); ++k) {
      os << k;
      for (Eigen::Index i = 0; i < run.y.rows(); ++i) os << ',' << run.y(i, k);
      os << '\n';
    }
  });
  if (!o.quiet)
    std::cout << "simulated " << s.horizon << " steps, w_linf " << run.w_linf << ", digest "
              << hex64(run.measurement_digest) << " -> " << dir.string() << "\n";
  return kOk;
}

int cmd_synthesize(const Options& o) {
  const Scenario s = load(o);
  const HighwayModel model = s.model();
  const SynthesisReport rep = design_observer(s, model);
  const fs::path dir = prepare_out(o);
  write_synthesis_report((dir / "synthesis.txt").string(), rep);
  if (!o.quiet) print_synthesis(rep);
  return kOk;
}

SynthesisReport gain_for(const Options& o, const Scenario& s, const HighwayModel& model) {
  if (!o.gain.empty()) return read_synthesis_report(o.gain);
  return design_observer(s, model);
}

int cmd_estimate(const Options& o) {
  if (o.estimator != "observer" && o.estimator != "ukf")
    throw ParseError("--estimator must be observer or ukf");
  const Scenario s = load(o);
  const HighwayModel model = s.model();
  const Eigen::Index n = model.state_dim();
  const Eigen::MatrixXd Z = s.observer.performance_weight * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd xhat0 = Eigen::VectorXd::Constant(n, s.initial_estimate());

  std::optional<SynthesisReport> design;
  if (o.estimator == "observer") design = gain_for(o, s, model);
  const PlantRun run = simulate_plant(s, model);
  const EstimationTrace t = o.estimator == "observer"
                                ? run_observer(model, run, design->result.L, xhat0, Z)
                                : run_ukf(model, run, s.ukf, xhat0, Z);
  if (!t.failure.empty()) throw std::runtime_error(o.estimator + " failed: " + t.failure);

  const fs::path dir = prepare_out(o);
  write_file(dir / ("trace_" + o.estimator + ".csv"), [&](std::ostream& os) { write_trace_csv(os, t); });
  const double e = rmse(t);
  write_file(dir / ("summary_" + o.estimator + ".csv"), [&](std::ostream& os) {
    os << std::setprecision(17) << "estimator,rmse,seconds,mu,zeta\n";
    if (design) {
      const PerformanceBound b = performance_norm(t, design->result.mu, run.w_linf);
      os << o.estimator << ',' << e << ',' << t.seconds << ',' << b.mu << ',' << b.zeta << '\n';
    } else {
      os << o.estimator << ',' << e << ',' << t.seconds << ",,\n";
    }
  });
  if (!o.quiet) std::cout << o.estimator << " rmse " << e << "  wall time " << t.seconds << " s\n";
  return kOk;
}

int cmd_compare(const Options& o) {
  const Scenario s = load(o);
  const HighwayModel model = s.model();
  const SynthesisReport design = gain_for(o, s, model);
  const ExperimentReport rep = run_experiment(s, design);

  const fs::path dir = prepare_out(o);
  write_synthesis_report((dir / "synthesis.txt").string(), design);
  write_file(dir / "report.json", [&](std::ostream& os) { os << report_to_json(rep).dump(1) << '\n'; });
  write_file(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, rep); });
  write_file(dir / "performance.csv", [&](std::ostream& os) { write_performance_csv(os, rep); });
  write_file(dir / "densities.csv", [&](std::ostream& os) { write_density_csv(os, rep); });
  write_file(dir / "component_rmse.csv", [&](std::ostream& os) { write_component_rmse_csv(os, rep); });

  if (!o.quiet) {
    print_synthesis(design);
    std::cout << std::setprecision(6) << "estimator   rmse        wall time (s)\n"
              << "observer    " << std::setw(10) << rep.rmse_observer << "  " << rep.observer.seconds
              << "\n"
              << "ukf         " << std::setw(10) << rep.rmse_ukf << "  " << rep.ukf.seconds << "\n"
              << "w_linf " << rep.w_linf << "  zeta " << rep.zeta << "  ||z|| <= zeta from step "
              << (rep.settles_at ? std::to_string(*rep.settles_at) : std::string("never")) << "\n";
    if (!rep.observer.failure.empty()) std::cout << "observer failed: " << rep.observer.failure << "\n";
    if (!rep.ukf.failure.empty()) std::cout << "ukf failed: " << rep.ukf.failure << "\n";
  }
  return rep.observer.failure.empty() && rep.ukf.failure.empty() ? kOk : kRuntime;
}

int cmd_lipschitz(const Options& o) {
  const Scenario s = load(o);
  const HighwayModel model = s.model();
  LipschitzOptions lo;
  lo.samples = o.samples;
  lo.seed = s.seed;
  const LipschitzEstimate id = estimate_lipschitz(model, LinearPart::kIdentity, s.split_ratios(), lo);
  const LipschitzEstimate ff = estimate_lipschitz(model, LinearPart::kFreeFlow, s.split_ratios(), lo);
  const fs::path dir = prepare_out(o);
  write_file(dir / "lipschitz.txt", [&](std::ostream& os) {
    os << std::setprecision(17) << "samples " << lo.samples << "\nseed " << lo.seed
       << "\ngamma_assumed " << s.observer.gamma << "\ngamma_hat_identity " << id.gamma
       << "\ngamma_hat_free_flow " << ff.gamma << "\nskipped_pairs " << id.skipped + ff.skipped
       << '\n';
  });
  if (!o.quiet)
    std::cout << "sampled Lipschitz lower bounds over " << lo.samples << " pairs\n"
              << "  A = I:         " << id.gamma << (id.gamma <= s.observer.gamma ? " <= " : " > ")
              << s.observer.gamma << " (assumed)\n"
              << "  A = free-flow: " << ff.gamma << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ACTM traffic density observer toolkit"};
  app.require_subcommand(1);
  app.footer("Exit status: 0 success, 2 parse/usage error, 3 infeasible design, 4 runtime failure.\n"
             "ACTM_OUT_DIR sets the default output directory.");
  Options o;

  auto* sim = app.add_subcommand("simulate", "Simulate the plant and write densities.csv");
  add_common(sim, o);
  auto* syn = app.add_subcommand("synthesize", "Solve the observer design SDP, write synthesis.txt");
  add_common(syn, o);
  auto* est = app.add_subcommand("estimate", "Run one estimator, write its trace");
  add_common(est, o);
  est->add_option("--estimator", o.estimator, "observer or ukf")->check(CLI::IsMember({"observer", "ukf"}));
  est->add_option("--gain", o.gain, "Synthesis report to take L from")->check(CLI::ExistingFile);
  auto* cmp = app.add_subcommand("compare", "Run observer and UKF on one stream, write the report");
  add_common(cmp, o);
  cmp->add_option("--gain", o.gain, "Synthesis report to take L from")->check(CLI::ExistingFile);
  auto* lip = app.add_subcommand("lipschitz", "Sample the Lipschitz constant of the nonlinearity");
  add_common(lip, o);
  lip->add_option("--samples", o.samples, "Number of sampled pairs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*syn) return cmd_synthesize(o);
    if (*est) return cmd_estimate(o);
    if (*cmp) return cmd_compare(o);
    if (*lip) return cmd_lipschitz(o);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
