#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "actm_observer/errors.hpp"

namespace actm {

/// One estimator run: column k of each matrix is step k.
struct EstimationTrace {
  std::string estimator;
  Eigen::MatrixXd x;     // true state, n x kf
  Eigen::MatrixXd xhat;  // estimate, n x kf
  Eigen::MatrixXd y;     // measurements, p x kf
  Eigen::VectorXd error_norm;
  Eigen::VectorXd output_norm;  // ||Z e[k]||
  double seconds = 0.0;
  std::uint64_t measurement_digest = 0;  // of the y stream this run consumed
  std::string failure;  // empty when the run completed

  Eigen::Index steps() const { return x.cols(); }

  void validate() const {
    const Eigen::Index kf = x.cols();
    if (xhat.cols() != kf || y.cols() != kf || error_norm.size() != kf || output_norm.size() != kf)
      throw ModelError("estimation trace: series lengths differ");
    if (xhat.rows() != x.rows()) throw ModelError("estimation trace: state dimensions differ");
  }
};

/// Fills the error and performance-output series from x and xhat.
inline void finalize_trace(EstimationTrace& t, const Eigen::MatrixXd& Z) {
  if (Z.cols() != t.x.rows()) throw ModelError("performance matrix has wrong width");
  const Eigen::MatrixXd e = t.x - t.xhat;
  t.error_norm = e.colwise().norm().transpose();
  t.output_norm = (Z * e).colwise().norm().transpose();
}

/// Root mean square error of every state component over the horizon.
inline Eigen::VectorXd rmse_components(const EstimationTrace& t) {
  t.validate();
  if (t.steps() == 0) throw ModelError("rmse of an empty trace");
  const Eigen::MatrixXd e = t.x - t.xhat;
  return (e.array().square().rowwise().sum() / static_cast<double>(t.steps())).sqrt().matrix();
}

/// Sum of the per-component RMS errors.
inline double rmse(const EstimationTrace& t) { return rmse_components(t).sum(); }

struct PerformanceBound {
  Eigen::VectorXd series;  // ||z[k]||
  double mu = 0.0;
  double w_linf = 0.0;
  double zeta = 0.0;
  // First k with series[j] <= zeta for every j >= k.
  std::optional<Eigen::Index> settles_at;

  /// True when the series stays under zeta over the trailing `fraction` of
  /// the horizon.
  bool holds_over_tail(double fraction) const {
    if (!settles_at) return false;
    const auto tail_start = static_cast<Eigen::Index>(
        std::floor((1.0 - fraction) * static_cast<double>(series.size())));
    return *settles_at <= tail_start;
  }
};

inline PerformanceBound performance_norm(const EstimationTrace& t, double mu, double w_linf) {
  t.validate();
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ModelError("performance level mu is missing");
  if (!(w_linf >= 0.0)) throw ModelError("disturbance norm is missing");
  PerformanceBound b;
  b.series = t.output_norm;
  b.mu = mu;
  b.w_linf = w_linf;
  b.zeta = mu * w_linf;
  Eigen::Index k = b.series.size();
  while (k > 0 && b.series(k - 1) <= b.zeta) --k;
  if (k < b.series.size() || b.series.size() == 0) b.settles_at = k;
  return b;
}

}  // namespace actm
