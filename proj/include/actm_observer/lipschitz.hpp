#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "actm_observer/actm.hpp"
#include "actm_observer/errors.hpp"

namespace actm {

struct LipschitzOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  // Share of pairs drawn as small perturbations of the first point rather than
  // two independent points; local pairs probe the steepest pieces of a
  // piecewise-linear map.
  double local_fraction = 0.5;
};

struct LipschitzEstimate {
  double gamma = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // coincident pairs
};

/// Sampled lower bound on the Lipschitz constant of `f(x, u)` in x over the
/// box [0, state_max]^n x [0, input_max]^m:
///   max ||f(x,u) - f(y,u)|| / ||x - y||.
/// The estimate is the running maximum over one seeded stream, so it never
/// decreases as `samples` grows.
template <typename Map>
LipschitzEstimate estimate_lipschitz(const Map& f, int state_dim, int input_dim,
                                     double state_max, double input_max,
                                     const LipschitzOptions& opts) {
  if (!(state_max > 0.0)) throw ModelError("degenerate state domain for Lipschitz estimate");
  if (opts.samples < 2) throw ModelError("need at least two samples");

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](Eigen::Index size, double hi) {
    Eigen::VectorXd v(size);
    for (Eigen::Index k = 0; k < size; ++k) v(k) = hi * unit(rng);
    return v;
  };

  LipschitzEstimate est;
  for (std::size_t s = 0; s < opts.samples; ++s) {
    const Eigen::VectorXd x = draw(state_dim, state_max);
    const Eigen::VectorXd u = draw(input_dim, input_max);
    Eigen::VectorXd y;
    if (unit(rng) < opts.local_fraction) {
      // log-uniform radius between 1e-5 and 1e-1 of the box width
      const double radius = state_max * std::pow(10.0, -5.0 + 4.0 * unit(rng));
      Eigen::VectorXd dir = draw(state_dim, 2.0).array() - 1.0;
      y = (x + radius * dir).cwiseMax(0.0).cwiseMin(state_max);
    } else {
      y = draw(state_dim, state_max);
    }
    const double dx = (x - y).norm();
    if (dx == 0.0) {
      ++est.skipped;
      continue;
    }
    ++est.pairs;
    est.gamma = std::max(est.gamma, (f(x, u) - f(y, u)).norm() / dx);
  }
  return est;
}

/// Lipschitz estimate of the nonlinearity f = step - A x of `model`, with
/// split ratios held at `split_ratio` (one per off-ramp).
inline LipschitzEstimate estimate_lipschitz(const HighwayModel& model, LinearPart split,
                                            const std::vector<double>& split_ratio,
                                            const LipschitzOptions& opts) {
  const auto& topo = model.topology();
  const Eigen::MatrixXd A = model.linear_part(split, split_ratio);
  const int n_on = topo.onramp_count();
  auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    ExogenousInput in;
    in.upstream_demand = u(0);
    in.downstream_supply = u(1);
    in.onramp_demand.assign(u.data() + 2, u.data() + 2 + n_on);
    in.offramp_capacity.assign(u.data() + 2 + n_on, u.data() + u.size());
    in.split_ratio = split_ratio;
    return model.nonlinearity(x, in, A);
  };
  return estimate_lipschitz(f, topo.state_dim(), topo.input_dim(), model.fd().jam_density,
                            model.fd().capacity(), opts);
}

}  // namespace actm
