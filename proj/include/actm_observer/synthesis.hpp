#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "actm_observer/errors.hpp"
#include "actm_observer/sdp/conic_program.hpp"
#include "actm_observer/sdp/interior_point.hpp"

namespace actm {

/// Detectability pre-check failure: an unobservable mode on or outside the
/// unit circle.
class NotDetectable : public InfeasibleError {
 public:
  explicit NotDetectable(const std::string& what)
      : InfeasibleError(what, std::numeric_limits<double>::quiet_NaN()) {}
};

/// Data of the L-infinity observer design program with alpha and mu1 fixed.
struct SynthesisProblem {
  Eigen::MatrixXd A, C, Bw, Dw;
  Eigen::MatrixXd Z;  // performance output z = Z e
  double gamma = 0.0;
  double alpha = 0.05;
  double mu1 = 1e4;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index p() const { return C.rows(); }
  Eigen::Index q() const { return Bw.cols(); }

  void validate() const {
    std::ostringstream msg;
    const auto n_ = n();
    if (A.cols() != n_) msg << "A must be square; ";
    if (C.cols() != n_) msg << "C must have n columns; ";
    if (Bw.rows() != n_) msg << "Bw must have n rows; ";
    if (Dw.rows() != p() || Dw.cols() != q()) msg << "Dw must be p x q; ";
    if (Z.cols() != n_) msg << "Z must have n columns; ";
    if (!(alpha > 0.0 && alpha < 1.0)) msg << "alpha must lie in (0, 1); ";
    if (!(gamma >= 0.0)) msg << "gamma must be nonnegative; ";
    if (!(mu1 > 0.0)) msg << "mu1 must be positive; ";
    if (!msg.str().empty()) throw ModelError("synthesis problem: " + msg.str());
  }
};

struct SynthesisOptions {
  sdp::SdpOptions sdp;
  bool check_detectability = true;
  double p_margin = 1e-8;             // P - p_margin I PSD
  double residual_tolerance = 1e-7;   // max eigenvalue of each re-evaluated LMI
  double condition_limit = 1e12;      // cond(P) above this is flagged
};

struct SynthesisResult {
  Eigen::MatrixXd L, P, Y;
  double epsilon = 0.0, mu0 = 0.0, mu1 = 0.0, mu2 = 0.0;
  double mu = 0.0;  // sqrt(mu0 mu1 + mu2)
  double alpha = 0.0, gamma = 0.0;
  double residual_stability = 0.0;    // max eigenvalue of the decrease LMI
  double residual_performance = 0.0;  // max eigenvalue of the output LMI
  double p_min_eigenvalue = 0.0;
  double p_condition = 0.0;
  bool ill_conditioned = false;
  int iterations = 0;
  double seconds = 0.0;
};

/// Lowered program plus the variable layout needed to read a solution back.
struct LmiProgram {
  sdp::ConicProgram program;
  Eigen::Index n = 0, p = 0;
  sdp::AffineMatrix stability;    // must be NSD
  sdp::AffineMatrix performance;  // must be NSD
  int p_begin = 0, y_begin = 0, epsilon = 0, mu0 = 0, mu2 = 0;

  Eigen::MatrixXd P(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd out(n, n);
    int k = p_begin;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j; i < n; ++i) out(i, j) = out(j, i) = y(k++);
    return out;
  }
  Eigen::MatrixXd Y(const Eigen::VectorXd& y) const {
    return Eigen::Map<const Eigen::MatrixXd>(y.data() + y_begin, n, p);
  }
};

/// Writes both design LMIs in the decision variables (P, Y, eps, mu0, mu2),
/// with Phi = P Bw - Y Dw:
///
///   [ (a-1)P + eps g^2 I   *         *          *  ]
///   [ PA - YC              P - eps I *          *  ]  NSD
///   [ 0                    Phi'      -a mu0 I   *  ]
///   [ PA - YC              0         Phi        -P ]
///
///   [ -P  *        *       ]
///   [ 0   -mu2 I   *       ]  NSD
///   [ Z   0        -mu1 I  ]
///
/// plus P >= margin I and eps, mu0, mu2 >= 0. Objective mu0 mu1 + mu2.
inline LmiProgram assemble_lmi(const SynthesisProblem& prob, double p_margin = 1e-8) {
  prob.validate();
  using sdp::AffineMatrix;
  const int n = static_cast<int>(prob.n());
  const int p = static_cast<int>(prob.p());
  const int q = static_cast<int>(prob.q());
  const int nz = static_cast<int>(prob.Z.rows());

  LmiProgram out;
  out.n = n;
  out.p = p;
  sdp::VariableRegistry vars;
  out.p_begin = vars.count();
  const AffineMatrix P = vars.symmetric(n);
  out.y_begin = vars.count();
  const AffineMatrix Y = vars.full(n, p);
  out.epsilon = vars.scalar();
  out.mu0 = vars.scalar();
  out.mu2 = vars.scalar();

  const Eigen::MatrixXd I_n = Eigen::MatrixXd::Identity(n, n);
  const AffineMatrix eps_n = AffineMatrix::blocks({{vars.scaled_identity(out.epsilon, n)}});
  const AffineMatrix M = P * prob.A - Y * prob.C;
  const AffineMatrix Phi = P * prob.Bw - Y * prob.Dw;
  const AffineMatrix O_nn(n, n), O_nq(n, q), O_qn(q, n);

  out.stability = AffineMatrix::blocks({
      {(prob.alpha - 1.0) * P + prob.gamma * prob.gamma * eps_n, M.transpose(), O_nq,
       M.transpose()},
      {M, P - eps_n, Phi, O_nn},
      {O_qn, Phi.transpose(), -prob.alpha * vars.scaled_identity(out.mu0, q), Phi.transpose()},
      {M, O_nn, Phi, -P},
  });

  const AffineMatrix Zc(prob.Z);
  out.performance = AffineMatrix::blocks({
      {-P, AffineMatrix(n, q), Zc.transpose()},
      {AffineMatrix(q, n), -vars.scaled_identity(out.mu2, q), AffineMatrix(q, nz)},
      {Zc, AffineMatrix(nz, q), AffineMatrix(Eigen::MatrixXd(-prob.mu1 * Eigen::MatrixXd::Identity(nz, nz)))},
  });

  const AffineMatrix margin = P - AffineMatrix(Eigen::MatrixXd(p_margin * I_n));

  AffineMatrix scalars(3, 3);
  for (int k = 0; k < 3; ++k) {
    sdp::SparseMatrix e(3, 3);
    e.insert(k, k) = 1.0;
    scalars.add_term(out.epsilon + k, e);
  }

  auto& prog = out.program;
  prog.num_variables = vars.count();
  prog.c = Eigen::VectorXd::Zero(prog.num_variables);
  prog.c(out.mu0) = prob.mu1;
  prog.c(out.mu2) = 1.0;
  prog.blocks.push_back(sdp::make_block(out.stability, true, "stability"));
  prog.blocks.push_back(sdp::make_block(out.performance, true, "performance"));
  prog.blocks.push_back(sdp::make_block(margin, false, "P margin"));
  prog.blocks.push_back(sdp::make_block(scalars, false, "nonnegative scalars"));
  return out;
}

/// Throws NotDetectable when some eigenvalue |lambda| >= 1 of A has
/// rank [lambda I - A; C] < n.
inline void check_detectability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
  const Eigen::Index n = A.rows();
  const Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(A);
  const double scale = std::max(1.0, A.norm() + C.norm());
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - 1e-12) continue;
    Eigen::MatrixXcd H(n + C.rows(), n);
    H.topRows(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    H.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(H);
    const auto& s = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > 1e-9 * scale ? 1 : 0;
    if (rank < n) {
      std::ostringstream msg;
      msg << "(A, C) is not detectable: mode lambda = " << lambda << " has rank " << rank
          << " < " << n << "; add sensors that observe it or change the linear part";
      throw NotDetectable(msg.str());
    }
  }
}

namespace detail {

inline double max_eigenvalue(const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

}  // namespace detail

/// Dense re-evaluation of the decrease LMI from raw variables, independent of
/// the conic lowering.
inline Eigen::MatrixXd stability_matrix(const SynthesisProblem& prob, const Eigen::MatrixXd& P,
                                        const Eigen::MatrixXd& Y, double epsilon, double mu0) {
  const Eigen::Index n = prob.n(), q = prob.q();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd M = P * prob.A - Y * prob.C;
  const Eigen::MatrixXd Phi = P * prob.Bw - Y * prob.Dw;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3 * n + q, 3 * n + q);
  S.block(0, 0, n, n) = (prob.alpha - 1.0) * P + epsilon * prob.gamma * prob.gamma * I;
  S.block(n, 0, n, n) = M;
  S.block(n, n, n, n) = P - epsilon * I;
  S.block(2 * n, n, q, n) = Phi.transpose();
  S.block(2 * n, 2 * n, q, q) = -prob.alpha * mu0 * Eigen::MatrixXd::Identity(q, q);
  S.block(2 * n + q, 0, n, n) = M;
  S.block(2 * n + q, 2 * n, n, q) = Phi;
  S.block(2 * n + q, 2 * n + q, n, n) = -P;
  // mirror the strictly lower blocks
  return S.triangularView<Eigen::Lower>().toDenseMatrix() +
         S.triangularView<Eigen::StrictlyLower>().transpose().toDenseMatrix();
}

inline Eigen::MatrixXd performance_matrix(const SynthesisProblem& prob, const Eigen::MatrixXd& P,
                                          double mu2) {
  const Eigen::Index n = prob.n(), q = prob.q(), nz = prob.Z.rows();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + q + nz, n + q + nz);
  S.block(0, 0, n, n) = -P;
  S.block(n, n, q, q) = -mu2 * Eigen::MatrixXd::Identity(q, q);
  S.block(n + q, 0, nz, n) = prob.Z;
  S.block(0, n + q, n, nz) = prob.Z.transpose();
  S.block(n + q, n + q, nz, nz) = -prob.mu1 * Eigen::MatrixXd::Identity(nz, nz);
  return S;
}

/// Solves the convexified design program and verifies the certificate.
///
/// Throws NotDetectable / InfeasibleError when no gain exists, SolverError when
/// the solver stalls or the returned point fails the residual re-check.
inline SynthesisResult solve(const SynthesisProblem& prob, const SynthesisOptions& opts = {}) {
  prob.validate();
  if (opts.check_detectability) check_detectability(prob.A, prob.C);
  const LmiProgram lmi = assemble_lmi(prob, opts.p_margin);
  const sdp::SdpSolution sol = sdp::InteriorPointSolver(opts.sdp).solve(lmi.program);

  if (sol.status == sdp::SdpStatus::kInfeasible) {
    std::ostringstream msg;
    msg << "observer design LMIs are infeasible (gamma = " << prob.gamma
        << ", alpha = " << prob.alpha << "); certificate residual " << sol.certificate_residual
        << " after " << sol.iterations << " iterations";
    throw InfeasibleError(msg.str(), sol.certificate_residual);
  }
  if (sol.status != sdp::SdpStatus::kOptimal && sol.status != sdp::SdpStatus::kNearOptimal) {
    std::ostringstream msg;
    msg << "SDP solver stopped with status " << sdp::to_string(sol.status) << " (gap "
        << sol.relative_gap << ", primal " << sol.primal_residual << ", dual "
        << sol.dual_residual << ")";
    throw SolverError(msg.str());
  }

  SynthesisResult res;
  res.P = lmi.P(sol.y);
  res.Y = lmi.Y(sol.y);
  res.epsilon = sol.y(lmi.epsilon);
  res.mu0 = sol.y(lmi.mu0);
  res.mu2 = sol.y(lmi.mu2);
  res.mu1 = prob.mu1;
  res.alpha = prob.alpha;
  res.gamma = prob.gamma;
  res.mu = std::sqrt(std::max(0.0, res.mu0 * res.mu1 + res.mu2));
  res.iterations = sol.iterations;
  res.seconds = sol.seconds;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pe(res.P, Eigen::EigenvaluesOnly);
  res.p_min_eigenvalue = pe.eigenvalues().minCoeff();
  res.p_condition = pe.eigenvalues().maxCoeff() / res.p_min_eigenvalue;
  res.ill_conditioned = !(res.p_condition <= opts.condition_limit);
  if (!(res.p_min_eigenvalue > 0.0)) throw SolverError("returned P is not positive definite");
  res.L = res.P.llt().solve(res.Y);

  res.residual_stability =
      detail::max_eigenvalue(stability_matrix(prob, res.P, res.Y, res.epsilon, res.mu0));
  res.residual_performance = detail::max_eigenvalue(performance_matrix(prob, res.P, res.mu2));
  const double worst_scalar = std::min({res.epsilon, res.mu0, res.mu2});
  if (res.residual_stability > opts.residual_tolerance ||
      res.residual_performance > opts.residual_tolerance ||
      worst_scalar < -opts.residual_tolerance) {
    std::ostringstream msg;
    msg << "certificate failed re-verification: residuals " << res.residual_stability << ", "
        << res.residual_performance << " exceed " << opts.residual_tolerance;
    throw SolverError(msg.str());
  }
  return res;
}

struct SweepRow {
  double alpha = 0.0;
  bool feasible = false;
  double mu = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

struct AlphaSweep {
  SynthesisResult best;
  std::vector<SweepRow> table;
};

/// Solves at every alpha in `grid` and keeps the feasible result with the
/// smallest mu.
inline AlphaSweep alpha_sweep(SynthesisProblem prob, const std::vector<double>& grid,
                              const SynthesisOptions& opts = {}) {
  if (grid.empty()) throw ModelError("alpha grid is empty");
  AlphaSweep out;
  std::optional<SynthesisResult> best;
  for (double a : grid) {
    if (!(a > 0.0 && a < 1.0)) throw ModelError("alpha grid point outside (0, 1)");
    prob.alpha = a;
    SweepRow row;
    row.alpha = a;
    try {
      SynthesisResult r = solve(prob, opts);
      row.feasible = true;
      row.mu = r.mu;
      if (!best || r.mu < best->mu) best = std::move(r);
    } catch (const InfeasibleError& e) {
      row.note = e.what();
    } catch (const SolverError& e) {
      row.note = e.what();
    }
    out.table.push_back(row);
  }
  if (!best) throw InfeasibleError("every alpha grid point is infeasible", std::numeric_limits<double>::quiet_NaN());
  out.best = std::move(*best);
  return out;
}

/// Outcome of backing gamma off until the program becomes feasible.
struct GammaBackoff {
  SynthesisResult result;
  double requested = 0.0;
  double certified = 0.0;
  std::vector<std::pair<double, bool>> probes;  // (gamma, feasible)
};

/// Solves at the requested gamma; if infeasible, bisects on [0, gamma] for the
/// largest feasible Lipschitz level (to `relative_tolerance` of the request).
inline GammaBackoff solve_with_gamma_backoff(SynthesisProblem prob, const SynthesisOptions& opts = {},
                                             double relative_tolerance = 0.02) {
  GammaBackoff out;
  out.requested = prob.gamma;
  auto attempt = [&](double g) -> std::optional<SynthesisResult> {
    prob.gamma = g;
    try {
      SynthesisResult r = solve(prob, opts);
      out.probes.emplace_back(g, true);
      return r;
    } catch (const NotDetectable&) {
      throw;
    } catch (const InfeasibleError&) {
      out.probes.emplace_back(g, false);
      return std::nullopt;
    } catch (const SolverError&) {
      out.probes.emplace_back(g, false);
      return std::nullopt;
    }
  };

  if (auto r = attempt(out.requested)) {
    out.result = std::move(*r);
    out.certified = out.requested;
    return out;
  }
  auto low = attempt(0.0);
  if (!low) throw InfeasibleError("observer design is infeasible even with gamma = 0",
                                  std::numeric_limits<double>::quiet_NaN());
  double lo = 0.0, hi = out.requested;
  SynthesisResult best = std::move(*low);
  while (hi - lo > relative_tolerance * out.requested) {
    const double mid = 0.5 * (lo + hi);
    if (auto r = attempt(mid)) {
      lo = mid;
      best = std::move(*r);
    } else {
      hi = mid;
    }
  }
  out.result = std::move(best);
  out.certified = lo;
  return out;
}

}  // namespace actm
