#pragma once

#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "actm_observer/errors.hpp"
#include "actm_observer/synthesis.hpp"

namespace actm {

/// Synthesis report plus the Lipschitz level actually certified, which can be
/// lower than the requested one after back-off.
struct SynthesisReport {
  SynthesisResult result;
  double gamma_requested = 0.0;
  std::string linear_part;
};

namespace detail {

inline void write_matrix(std::ostream& os, const char* name, const Eigen::MatrixXd& M) {
  os << "matrix " << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? " " : "") << M(i, j);
    os << '\n';
  }
}

}  // namespace detail

/// Plain text: `key value` lines for scalars, then `matrix NAME rows cols`
/// followed by one whitespace-separated line per row. Lines starting with
/// '#' are comments.
inline std::string format_synthesis_report(const SynthesisReport& rep) {
  const auto& r = rep.result;
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# observer synthesis report\n";
  os << "linear_part " << (rep.linear_part.empty() ? "unknown" : rep.linear_part) << '\n';
  os << "alpha " << r.alpha << '\n';
  os << "gamma " << r.gamma << '\n';
  os << "gamma_requested " << rep.gamma_requested << '\n';
  os << "mu0 " << r.mu0 << '\n';
  os << "mu1 " << r.mu1 << '\n';
  os << "mu2 " << r.mu2 << '\n';
  os << "mu " << r.mu << '\n';
  os << "epsilon " << r.epsilon << '\n';
  os << "residual_stability " << r.residual_stability << '\n';
  os << "residual_performance " << r.residual_performance << '\n';
  os << "p_min_eigenvalue " << r.p_min_eigenvalue << '\n';
  os << "p_condition " << r.p_condition << '\n';
  os << "ill_conditioned " << (r.ill_conditioned ? 1 : 0) << '\n';
  os << "iterations " << r.iterations << '\n';
  os << "seconds " << r.seconds << '\n';
  detail::write_matrix(os, "L", r.L);
  detail::write_matrix(os, "P", r.P);
  detail::write_matrix(os, "Y", r.Y);
  return os.str();
}

inline SynthesisReport parse_synthesis_report(const std::string& text) {
  std::istringstream in(text);
  std::map<std::string, std::string> scalars;
  std::map<std::string, Eigen::MatrixXd> matrices;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError("synthesis report line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "matrix") {
      std::string name;
      Eigen::Index rows = -1, cols = -1;
      if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) fail("bad matrix header");
      Eigen::MatrixXd M(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) fail("matrix " + name + " is truncated");
        ++line_no;
        std::istringstream rs(line);
        for (Eigen::Index j = 0; j < cols; ++j)
          if (!(rs >> M(i, j))) fail("matrix " + name + " row is short");
        std::string extra;
        if (rs >> extra) fail("matrix " + name + " row is long");
      }
      matrices[name] = std::move(M);
    } else {
      std::string value;
      if (!(ls >> value)) fail("missing value for " + key);
      scalars[key] = value;
    }
  }

  auto num = [&](const char* key) {
    const auto it = scalars.find(key);
    if (it == scalars.end()) throw ParseError(std::string("synthesis report lacks ") + key);
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      throw ParseError(std::string("synthesis report: bad number for ") + key);
    }
  };
  auto mat = [&](const char* name) {
    const auto it = matrices.find(name);
    if (it == matrices.end()) throw ParseError(std::string("synthesis report lacks matrix ") + name);
    return it->second;
  };

  SynthesisReport rep;
  auto& r = rep.result;
  rep.linear_part = scalars.count("linear_part") ? scalars["linear_part"] : "unknown";
  r.alpha = num("alpha");
  r.gamma = num("gamma");
  rep.gamma_requested = scalars.count("gamma_requested") ? num("gamma_requested") : r.gamma;
  r.mu0 = num("mu0");
  r.mu1 = num("mu1");
  r.mu2 = num("mu2");
  r.mu = num("mu");
  r.epsilon = num("epsilon");
  r.residual_stability = num("residual_stability");
  r.residual_performance = num("residual_performance");
  if (scalars.count("p_min_eigenvalue")) r.p_min_eigenvalue = num("p_min_eigenvalue");
  if (scalars.count("p_condition")) r.p_condition = num("p_condition");
  if (scalars.count("ill_conditioned")) r.ill_conditioned = num("ill_conditioned") != 0.0;
  if (scalars.count("iterations")) r.iterations = static_cast<int>(num("iterations"));
  if (scalars.count("seconds")) r.seconds = num("seconds");
  r.L = mat("L");
  if (matrices.count("P")) r.P = mat("P");
  if (matrices.count("Y")) r.Y = mat("Y");
  return rep;
}

inline void write_synthesis_report(const std::string& path, const SynthesisReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << format_synthesis_report(rep);
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline SynthesisReport read_synthesis_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open synthesis report " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synthesis_report(buf.str());
}

}  // namespace actm
