#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "actm_observer/actm.hpp"
#include "actm_observer/errors.hpp"

namespace actm {

/// Luenberger-type observer x+ = A x + f(x, u) + L (y - C x). Because the
/// split of the dynamics into A and f is only a bookkeeping device,
/// A x + f(x, u) is evaluated as one model step.
struct ObserverState {
  Eigen::VectorXd xhat;
  Eigen::MatrixXd L;
  // Entries pulled back into [0, jam] so far.
  std::size_t clamped_entries = 0;
  std::size_t clamped_steps = 0;
};

inline ObserverState make_observer(const HighwayModel& model, Eigen::MatrixXd L,
                                   Eigen::VectorXd xhat0) {
  const Eigen::Index n = model.state_dim();
  if (xhat0.size() != n) throw ModelError("observer: initial estimate has wrong dimension");
  if (L.rows() != n || L.cols() != model.measurement_matrix().rows())
    throw ModelError("observer: gain must be n x p");
  ObserverState obs;
  obs.xhat = model.clamp(xhat0);
  obs.L = std::move(L);
  return obs;
}

/// One observer update with measurement `y`; `C` must be the model's
/// measurement matrix (passed in so callers can reuse it).
inline void observer_step(ObserverState& obs, const Eigen::VectorXd& y, const ExogenousInput& u,
                          const HighwayModel& model, const Eigen::MatrixXd& C) {
  if (y.size() != C.rows() || obs.L.cols() != C.rows() || obs.xhat.size() != C.cols())
    throw ModelError("observer: dimension mismatch");
  Eigen::VectorXd next = model.step(obs.xhat, u);
  next.noalias() += obs.L * (y - C * obs.xhat);

  const double jam = model.fd().jam_density;
  std::size_t hits = 0;
  for (Eigen::Index k = 0; k < next.size(); ++k) {
    if (next(k) < 0.0) {
      next(k) = 0.0;
      ++hits;
    } else if (next(k) > jam) {
      next(k) = jam;
      ++hits;
    }
  }
  obs.clamped_entries += hits;
  if (hits > 0) ++obs.clamped_steps;
  obs.xhat = std::move(next);
}

}  // namespace actm
