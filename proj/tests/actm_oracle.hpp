#pragma once

// Reference ACTM update written as an explicit case analysis. It does not
// call into HighwayModel; every min() is enumerated argument by argument.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "actm_observer/actm.hpp"

namespace oracle {

enum class SectionCase { kPlain, kOnRampOnly, kOffRampOnly, kBothRamps };

inline double smallest(const std::vector<double>& args) {
  std::size_t pick = 0;
  for (std::size_t k = 1; k < args.size(); ++k)
    if (args[k] < args[pick]) pick = k;
  return args[pick];
}

struct Reference {
  actm::FundamentalDiagram fd;
  actm::HighwayTopology topo;

  SectionCase section_case(int i) const {
    const bool on = contains(topo.onramp_sections, i), off = contains(topo.offramp_sections, i);
    if (on && off) return SectionCase::kBothRamps;
    if (on) return SectionCase::kOnRampOnly;
    if (off) return SectionCase::kOffRampOnly;
    return SectionCase::kPlain;
  }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const actm::ExogenousInput& u) const {
    const int N = topo.sections;
    const int NI = static_cast<int>(topo.onramp_sections.size());
    const double vf = fd.free_flow_speed, wc = fd.wave_speed, rc = fd.critical_density,
                 rm = fd.jam_density, dt = topo.time_step / topo.cell_length;

    auto rho = [&](int i) { return x(i - 1); };
    auto on_idx = [&](int i) { return N + position(topo.onramp_sections, i); };
    auto off_idx = [&](int i) { return N + NI + position(topo.offramp_sections, i); };
    auto beta_of = [&](int i) { return u.split_ratio[static_cast<std::size_t>(position(topo.offramp_sections, i))]; };
    auto xi_of = [&](int i) {
      return topo.onramp_occupancy.empty()
                 ? wc
                 : topo.onramp_occupancy[static_cast<std::size_t>(position(topo.onramp_sections, i))];
    };

    // r_i
    auto merge = [&](int i) {
      const double xi = xi_of(i);
      const double r = smallest({vf * x(on_idx(i)), xi * (rm - rho(i)), xi / wc * vf * rc});
      return r < 0.0 ? 0.0 : r;
    };
    auto send = [&](int i) {
      switch (section_case(i)) {
        case SectionCase::kPlain:
        case SectionCase::kOnRampOnly:
          return smallest({vf * rho(i), vf * rc});
        case SectionCase::kOffRampOnly:
        case SectionCase::kBothRamps: {
          const double b = beta_of(i);
          if (b == 0.0) return smallest({vf * rho(i), vf * rc});
          const double bb = 1.0 - b;
          const double exit_room = smallest({wc * (rm - x(off_idx(i))), vf * rc});
          return smallest({bb * vf * rho(i), bb * vf * rc, bb / b * exit_room});
        }
      }
      return 0.0;
    };
    auto receive = [&](int i) {
      switch (section_case(i)) {
        case SectionCase::kPlain:
        case SectionCase::kOffRampOnly:
          return smallest({wc * (rm - rho(i)), vf * rc});
        case SectionCase::kOnRampOnly:
        case SectionCase::kBothRamps: {
          const double r = merge(i);
          const double s = smallest({wc * (rm - rho(i)) - r, vf * rc - r});
          return s < 0.0 ? 0.0 : s;
        }
      }
      return 0.0;
    };

    std::vector<double> q(static_cast<std::size_t>(N) + 1);
    q[0] = smallest({u.upstream_demand, receive(1)});
    for (int i = 1; i < N; ++i) q[static_cast<std::size_t>(i)] = smallest({send(i), receive(i + 1)});
    q[static_cast<std::size_t>(N)] = smallest({send(N), u.downstream_supply});

    Eigen::VectorXd next(x.size());
    for (int i = 1; i <= N; ++i) {
      const double in = q[static_cast<std::size_t>(i) - 1], out = q[static_cast<std::size_t>(i)];
      double change = 0.0;
      switch (section_case(i)) {
        case SectionCase::kPlain:
          change = in - out;
          break;
        case SectionCase::kOnRampOnly:
          change = in + merge(i) - out;
          break;
        case SectionCase::kOffRampOnly:
          change = in - (beta_of(i) == 0.0 ? out : out / (1.0 - beta_of(i)));
          break;
        case SectionCase::kBothRamps:
          change = in + merge(i) - (beta_of(i) == 0.0 ? out : out / (1.0 - beta_of(i)));
          break;
      }
      next(i - 1) = rho(i) + dt * change;
    }
    for (int i : topo.onramp_sections) {
      const double ramp = x(on_idx(i));
      const double enter = smallest({wc * (rm - ramp), vf * rc,
                                     u.onramp_demand[static_cast<std::size_t>(position(topo.onramp_sections, i))]});
      next(on_idx(i)) = ramp + dt * (enter - merge(i));
    }
    for (int i : topo.offramp_sections) {
      const double ramp = x(off_idx(i));
      const double b = beta_of(i);
      const double diverge = b == 0.0 ? 0.0 : b / (1.0 - b) * q[static_cast<std::size_t>(i)];
      const double leave = smallest({vf * ramp, vf * rc,
                                     u.offramp_capacity[static_cast<std::size_t>(position(topo.offramp_sections, i))]});
      next(off_idx(i)) = ramp + dt * (diverge - leave);
    }
    for (Eigen::Index k = 0; k < next.size(); ++k) next(k) = next(k) < 0.0 ? 0.0 : (next(k) > rm ? rm : next(k));
    return next;
  }

  static bool contains(const std::vector<int>& v, int i) { return position(v, i) >= 0; }
  static int position(const std::vector<int>& v, int i) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (v[k] == i) return static_cast<int>(k);
    return -1;
  }
};

/// Every subset of {1..N} in increasing order.
inline std::vector<std::vector<int>> subsets(int N) {
  std::vector<std::vector<int>> out;
  for (int mask = 0; mask < (1 << N); ++mask) {
    std::vector<int> s;
    for (int i = 1; i <= N; ++i)
      if (mask & (1 << (i - 1))) s.push_back(i);
    out.push_back(s);
  }
  return out;
}

/// Visits every vector in grid^n.
inline void for_each_grid_point(int n, const std::vector<double>& grid,
                                const std::function<void(const Eigen::VectorXd&)>& visit) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd x(n);
  while (true) {
    for (int k = 0; k < n; ++k) x(k) = grid[idx[static_cast<std::size_t>(k)]];
    visit(x);
    int k = 0;
    while (k < n && ++idx[static_cast<std::size_t>(k)] == grid.size()) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == n) break;
  }
}

struct ExhaustiveResult {
  double max_deviation = 0.0;
  std::size_t states = 0;
  std::size_t configurations = 0;
};

/// Compares HighwayModel::step with the reference on every ramp layout with
/// up to `max_sections` sections and every state on a 5-point density grid,
/// under two input settings per layout.
inline ExhaustiveResult exhaustive_comparison(const actm::FundamentalDiagram& fd, int max_sections) {
  ExhaustiveResult res;
  const double rc = fd.critical_density, rm = fd.jam_density, cap = fd.capacity();
  const std::vector<double> grid{0.0, 0.5 * rc, rc, 0.5 * (rc + rm), rm};
  for (int N = 1; N <= max_sections; ++N)
    for (const auto& on : subsets(N))
      for (const auto& off : subsets(N))
        for (int variant = 0; variant < 2; ++variant) {
          actm::HighwayTopology t;
          t.sections = N;
          t.onramp_sections = on;
          t.offramp_sections = off;
          t.cell_length = 200.0;
          t.time_step = 1.0;
          if (variant == 1) t.onramp_occupancy.assign(on.size(), 0.4 * fd.wave_speed);
          const actm::HighwayModel model(fd, t);
          const Reference ref{fd, t};

          actm::ExogenousInput u;
          u.upstream_demand = variant == 0 ? cap : 0.3 * cap;
          u.downstream_supply = variant == 0 ? 0.6 * cap : cap;
          for (std::size_t k = 0; k < on.size(); ++k) u.onramp_demand.push_back(cap * (0.2 + 0.3 * k));
          for (std::size_t k = 0; k < off.size(); ++k) {
            u.offramp_capacity.push_back(cap * (0.9 - 0.35 * k));
            // second variant exercises the degenerate zero split
            u.split_ratio.push_back(variant == 0 ? 0.1 : (k % 2 == 0 ? 0.0 : 0.25));
          }
          ++res.configurations;
          for_each_grid_point(t.state_dim(), grid, [&](const Eigen::VectorXd& x) {
            const double dev = (model.step(x, u) - ref.step(x, u)).cwiseAbs().maxCoeff();
            if (dev > res.max_deviation) res.max_deviation = dev;
            ++res.states;
          });
        }
  return res;
}

}  // namespace oracle
