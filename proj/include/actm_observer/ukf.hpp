#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "actm_observer/errors.hpp"

namespace actm {

/// Scaled unscented transform constants.
struct UnscentedParams {
  double alpha = 0.01;
  double beta = 2.0;
  double kappa = -4.0;
};

struct SigmaWeights {
  double lambda = 0.0;
  double spread = 0.0;  // n + lambda
  Eigen::VectorXd mean;
  Eigen::VectorXd cov;
};

inline SigmaWeights sigma_weights(Eigen::Index n, const UnscentedParams& ut) {
  if (n < 1) throw ModelError("unscented transform needs n >= 1");
  SigmaWeights w;
  const double nd = static_cast<double>(n);
  w.lambda = ut.alpha * ut.alpha * (nd + ut.kappa) - nd;
  w.spread = nd + w.lambda;
  if (!(w.spread > 0.0)) throw ModelError("unscented transform: n + lambda must be positive");
  w.mean = Eigen::VectorXd::Constant(2 * n + 1, 0.5 / w.spread);
  w.cov = w.mean;
  // W0 is large and negative for small alpha; taking it as the complement of
  // the stored outer weights keeps the sum at 1 to within one rounding of W0.
  w.mean(0) = static_cast<double>(1.0L - 2.0L * static_cast<long double>(n) * static_cast<long double>(w.mean(1)));
  w.cov(0) = w.mean(0) + 1.0 - ut.alpha * ut.alpha + ut.beta;
  return w;
}

/// Filter state. `xhat`/`P` hold the prediction for the next measurement.
struct UkfState {
  Eigen::VectorXd xhat;
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  UnscentedParams ut;
  // Box the state lives in; sigma points and the mean are projected into it.
  std::optional<std::pair<double, double>> bounds;
  std::size_t covariance_repairs = 0;
  std::size_t clamped_steps = 0;
};

/// Lower factor S with S S' = M. When M is not numerically positive definite
/// its eigenvalues are floored at `floor` first and `repaired` is set.
inline Eigen::MatrixXd robust_sqrt(const Eigen::MatrixXd& M, double floor, bool& repaired) {
  repaired = false;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  if (eig.info() != Eigen::Success) throw SolverError("covariance eigendecomposition failed");
  const Eigen::VectorXd d = eig.eigenvalues().cwiseMax(floor);
  if (!d.allFinite()) throw SolverError("covariance has non-finite eigenvalues");
  repaired = true;
  return eig.eigenvectors() * d.cwiseSqrt().asDiagonal();
}

inline void symmetrize(Eigen::MatrixXd& M) { M = 0.5 * (M + M.transpose()).eval(); }

/// Measurement update with y = C x + v, v ~ (0, R), Joseph form.
inline void ukf_update(UkfState& s, const Eigen::VectorXd& y, const Eigen::MatrixXd& C) {
  const Eigen::Index n = s.xhat.size();
  if (C.cols() != n || C.rows() != y.size() || s.R.rows() != y.size())
    throw ModelError("ukf: measurement dimension mismatch");
  const Eigen::MatrixXd PCt = s.P * C.transpose();
  Eigen::MatrixXd S = C * PCt + s.R;
  symmetrize(S);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success) throw SolverError("ukf: innovation covariance is singular");
  const Eigen::MatrixXd K = ldlt.solve(PCt.transpose()).transpose();
  s.xhat += K * (y - C * s.xhat);
  const Eigen::MatrixXd IKC = Eigen::MatrixXd::Identity(n, n) - K * C;
  s.P = IKC * s.P * IKC.transpose() + K * s.R * K.transpose();
  symmetrize(s.P);
}

/// Time update through `transition` (x -> x+), then adds Q.
template <typename Transition>
void ukf_predict(UkfState& s, Transition&& transition) {
  const Eigen::Index n = s.xhat.size();
  const SigmaWeights w = sigma_weights(n, s.ut);
  bool repaired = false;
  const Eigen::MatrixXd root = robust_sqrt(w.spread * s.P, w.spread * 1e-12, repaired);
  if (repaired) ++s.covariance_repairs;

  Eigen::MatrixXd chi(n, 2 * n + 1);
  chi.col(0) = s.xhat;
  for (Eigen::Index i = 0; i < n; ++i) {
    chi.col(1 + i) = s.xhat + root.col(i);
    chi.col(1 + n + i) = s.xhat - root.col(i);
  }
  if (s.bounds) chi = chi.cwiseMax(s.bounds->first).cwiseMin(s.bounds->second);

  Eigen::MatrixXd prop(n, 2 * n + 1);
  for (Eigen::Index i = 0; i < chi.cols(); ++i) prop.col(i) = transition(Eigen::VectorXd(chi.col(i)));

  const Eigen::VectorXd mean = prop * w.mean;
  const Eigen::MatrixXd dev = prop.colwise() - mean;
  s.P = dev * w.cov.asDiagonal() * dev.transpose() + s.Q;
  symmetrize(s.P);
  s.xhat = mean;
  if (s.bounds) {
    const Eigen::VectorXd boxed = s.xhat.cwiseMax(s.bounds->first).cwiseMin(s.bounds->second);
    if (boxed != s.xhat) ++s.clamped_steps;
    s.xhat = boxed;
  }
}

/// Consumes y[k] and leaves the prediction of x[k+1] in `s`.
template <typename Transition>
void ukf_step(UkfState& s, const Eigen::VectorXd& y, const Eigen::MatrixXd& C,
              Transition&& transition) {
  ukf_update(s, y, C);
  ukf_predict(s, std::forward<Transition>(transition));
}

}  // namespace actm
