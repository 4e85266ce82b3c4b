#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "actm_observer/errors.hpp"
#include "actm_observer/fundamental_diagram.hpp"
#include "actm_observer/topology.hpp"

namespace actm {

/// Boundary and ramp flows for one time step (veh/s), plus off-ramp split
/// ratios. Ramp vectors follow the topology's ramp order.
struct ExogenousInput {
  double upstream_demand = 0.0;
  double downstream_supply = 0.0;
  std::vector<double> onramp_demand;
  std::vector<double> offramp_capacity;
  std::vector<double> split_ratio;

  /// Stacked u = [f_in, f_out, on-ramp demands..., off-ramp capacities...].
  Eigen::VectorXd flows() const {
    Eigen::VectorXd u(2 + onramp_demand.size() + offramp_capacity.size());
    u(0) = upstream_demand;
    u(1) = downstream_supply;
    Eigen::Index k = 2;
    for (double f : onramp_demand) u(k++) = f;
    for (double f : offramp_capacity) u(k++) = f;
    return u;
  }

  void validate(const HighwayTopology& topo, const FundamentalDiagram& fd) const {
    if (static_cast<int>(onramp_demand.size()) != topo.onramp_count() ||
        static_cast<int>(offramp_capacity.size()) != topo.offramp_count() ||
        static_cast<int>(split_ratio.size()) != topo.offramp_count())
      throw ModelError("exogenous input does not match ramp counts");
    const double cap = fd.capacity();
    auto in_range = [cap](double f) { return f >= 0.0 && f <= cap * (1.0 + 1e-12); };
    bool ok = in_range(upstream_demand) && in_range(downstream_supply);
    for (double f : onramp_demand) ok = ok && in_range(f);
    for (double f : offramp_capacity) ok = ok && in_range(f);
    if (!ok) throw ModelError("exogenous flow outside [0, capacity]");
    for (double b : split_ratio)
      if (!(b >= 0.0 && b < 1.0)) throw ModelError("split ratio outside [0, 1)");
  }
};

/// How the dynamics are split into x+ = A x + f(x, u).
enum class LinearPart {
  kIdentity,  // A = I, everything else in f
  kFreeFlow,  // A = Jacobian of the update in the uncongested regime
};

/// Disturbance lumping w = [process (n) | measurement (p)].
struct DisturbanceConfig {
  double process_variance = 0.0;
  double measurement_variance = 1e-3;
};

struct SystemMatrices {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Bw;
  Eigen::MatrixXd Dw;
  Eigen::MatrixXd C;
};

/// Asymmetric cell transmission model on a stretched highway.
///
/// Section-level functions take 1-based section numbers; interface_flow takes
/// boundary numbers 0..N where 0 is the upstream inlet and N the outlet.
class HighwayModel {
 public:
  // Entries beyond this fraction of jam density outside [0, jam] are errors,
  // anything smaller is round-off and gets clamped.
  static constexpr double kDomainTolerance = 1e-9;

  HighwayModel(FundamentalDiagram fd, HighwayTopology topo)
      : fd_(fd), topo_(std::move(topo)) {
    fd_.validate();
    topo_.validate(fd_);
  }

  const FundamentalDiagram& fd() const { return fd_; }
  const HighwayTopology& topology() const { return topo_; }
  int state_dim() const { return topo_.state_dim(); }

  double demand(int i, const Eigen::VectorXd& x, const ExogenousInput& u) const {
    check_section(i);
    const double cap = fd_.capacity();
    const double rho = x(topo_.section_state(i));
    const int slot = topo_.offramp_slot(i);
    if (slot < 0 || u.split_ratio.at(slot) == 0.0)
      return std::min(fd_.free_flow_speed * rho, cap);
    const double beta = u.split_ratio[slot];
    const double keep = 1.0 - beta;
    const double offramp_rho = x(topo_.offramp_state(i));
    const double offramp_supply =
        std::min(fd_.wave_speed * (fd_.jam_density - offramp_rho), cap);
    return std::min({keep * fd_.free_flow_speed * rho, keep * cap,
                     keep / beta * offramp_supply});
  }

  double supply(int i, const Eigen::VectorXd& x) const {
    check_section(i);
    const double room = fd_.wave_speed * (fd_.jam_density - x(topo_.section_state(i)));
    const double cap = fd_.capacity();
    if (!topo_.has_onramp(i)) return std::min(room, cap);
    const double merge = onramp_flow(i, x);
    return std::max(0.0, std::min(room - merge, cap - merge));
  }

  /// Flow r_i from the on-ramp of section i into the section.
  double onramp_flow(int i, const Eigen::VectorXd& x) const {
    const int slot = topo_.onramp_slot(i);
    if (slot < 0) throw ModelError("section " + std::to_string(i) + " has no on-ramp");
    const double xi = topo_.occupancy(slot, fd_);
    const double ramp_rho = x(topo_.onramp_state(i));
    const double rho = x(topo_.section_state(i));
    const double r = std::min({fd_.free_flow_speed * ramp_rho,
                               xi * (fd_.jam_density - rho),
                               xi / fd_.wave_speed * fd_.capacity()});
    return std::max(0.0, r);
  }

  /// Flow q_i across the boundary downstream of section i (0..N).
  double interface_flow(int i, const Eigen::VectorXd& x, const ExogenousInput& u) const {
    if (i < 0 || i > topo_.sections)
      throw ModelError("boundary index " + std::to_string(i) + " out of range");
    const double send = i == 0 ? u.upstream_demand : demand(i, x, u);
    const double receive = i == topo_.sections ? u.downstream_supply : supply(i + 1, x);
    return std::min(send, receive);
  }

  /// Flow entering the on-ramp of section i from outside the network.
  double onramp_inflow(int i, const Eigen::VectorXd& x, const ExogenousInput& u) const {
    const int slot = topo_.onramp_slot(i);
    if (slot < 0) throw ModelError("section " + std::to_string(i) + " has no on-ramp");
    const double ramp_rho = x(topo_.onramp_state(i));
    return std::min({fd_.wave_speed * (fd_.jam_density - ramp_rho), fd_.capacity(),
                     u.onramp_demand.at(slot)});
  }

  /// Flow leaving the off-ramp of section i to outside the network.
  double offramp_outflow(int i, const Eigen::VectorXd& x, const ExogenousInput& u) const {
    const int slot = topo_.offramp_slot(i);
    if (slot < 0) throw ModelError("section " + std::to_string(i) + " has no off-ramp");
    const double ramp_rho = x(topo_.offramp_state(i));
    return std::min({fd_.free_flow_speed * ramp_rho, fd_.capacity(),
                     u.offramp_capacity.at(slot)});
  }

  /// Flow s_i diverging from section i into its off-ramp.
  double offramp_flow(int i, const Eigen::VectorXd& x, const ExogenousInput& u) const {
    const int slot = topo_.offramp_slot(i);
    if (slot < 0) throw ModelError("section " + std::to_string(i) + " has no off-ramp");
    const double beta = u.split_ratio.at(slot);
    if (beta == 0.0) return 0.0;
    return beta / (1.0 - beta) * interface_flow(i, x, u);
  }

  /// One ACTM update. The result is clamped into [0, jam]; larger excursions
  /// throw DomainViolation.
  Eigen::VectorXd step(const Eigen::VectorXd& x, const ExogenousInput& u) const {
    check_state(x, "step input");
    const int n_sec = topo_.sections;
    const double gain = topo_.time_step / topo_.cell_length;

    std::vector<double> q(n_sec + 1);
    for (int i = 0; i <= n_sec; ++i) q[i] = interface_flow(i, x, u);

    Eigen::VectorXd next = x;
    for (int i = 1; i <= n_sec; ++i) {
      double net = q[i - 1] - q[i];
      if (topo_.has_onramp(i)) net += onramp_flow(i, x);
      if (const int slot = topo_.offramp_slot(i); slot >= 0) {
        const double beta = u.split_ratio.at(slot);
        if (beta != 0.0) net -= beta / (1.0 - beta) * q[i];
      }
      next(topo_.section_state(i)) += gain * net;
    }
    for (int i : topo_.onramp_sections)
      next(topo_.onramp_state(i)) += gain * (onramp_inflow(i, x, u) - onramp_flow(i, x));
    for (int i : topo_.offramp_sections) {
      const double beta = u.split_ratio.at(topo_.offramp_slot(i));
      const double diverge = beta == 0.0 ? 0.0 : beta / (1.0 - beta) * q[i];
      next(topo_.offramp_state(i)) += gain * (diverge - offramp_outflow(i, x, u));
    }
    check_state(next, "step output");
    return clamp(next);
  }

  /// Linear part A of the chosen split. `split_ratio` is per off-ramp.
  Eigen::MatrixXd linear_part(LinearPart kind, const std::vector<double>& split_ratio) const {
    const int n = state_dim();
    if (kind == LinearPart::kIdentity) return Eigen::MatrixXd::Identity(n, n);
    if (static_cast<int>(split_ratio.size()) != topo_.offramp_count())
      throw ModelError("need one split ratio per off-ramp");

    // Every demand sits on its free-flow branch: delta_i = (1-beta_i) v_f rho_i,
    // r_i = v_f rho_hat_i, s_check_i = v_f rho_check_i.
    const double c = topo_.courant_number(fd_);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i <= topo_.sections; ++i) {
      const int row = topo_.section_state(i);
      A(row, row) = 1.0 - c;
      if (i > 1) {
        const int up = i - 1;
        const int slot = topo_.offramp_slot(up);
        const double keep = slot < 0 ? 1.0 : 1.0 - split_ratio[slot];
        A(row, topo_.section_state(up)) = c * keep;
      }
      if (const int slot = topo_.onramp_slot(i); slot >= 0 && topo_.occupancy(slot, fd_) > 0.0)
        A(row, topo_.onramp_state(i)) = c;
    }
    for (int i : topo_.onramp_sections) {
      const int row = topo_.onramp_state(i);
      A(row, row) = topo_.occupancy(topo_.onramp_slot(i), fd_) > 0.0 ? 1.0 - c : 1.0;
    }
    for (int i : topo_.offramp_sections) {
      const int row = topo_.offramp_state(i);
      A(row, row) = 1.0 - c;
      A(row, topo_.section_state(i)) = c * split_ratio[topo_.offramp_slot(i)];
    }
    return A;
  }

  /// f(x, u) = step(x, u) - A x.
  Eigen::VectorXd nonlinearity(const Eigen::VectorXd& x, const ExogenousInput& u,
                               const Eigen::MatrixXd& A) const {
    return step(x, u) - A * x;
  }

  /// Selection matrix for the configured sensors.
  Eigen::MatrixXd measurement_matrix() const {
    const auto rows = topo_.sensor_states();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), state_dim());
    for (std::size_t r = 0; r < rows.size(); ++r) C(static_cast<Eigen::Index>(r), rows[r]) = 1.0;
    return C;
  }

  SystemMatrices assemble_system(LinearPart kind, const std::vector<double>& split_ratio,
                                 const DisturbanceConfig& dist) const {
    if (dist.process_variance < 0.0 || dist.measurement_variance < 0.0)
      throw ModelError("disturbance variances must be nonnegative");
    SystemMatrices sys;
    sys.A = linear_part(kind, split_ratio);
    sys.C = measurement_matrix();
    const Eigen::Index n = state_dim();
    const Eigen::Index p = sys.C.rows();
    sys.Bw = Eigen::MatrixXd::Zero(n, n + p);
    sys.Bw.leftCols(n).diagonal().setConstant(std::sqrt(dist.process_variance));
    sys.Dw = Eigen::MatrixXd::Zero(p, n + p);
    sys.Dw.rightCols(p).diagonal().setConstant(std::sqrt(dist.measurement_variance));
    return sys;
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(0.0).cwiseMin(fd_.jam_density);
  }

  bool in_domain(const Eigen::VectorXd& x) const {
    const double tol = kDomainTolerance * fd_.jam_density;
    return x.size() == state_dim() && x.minCoeff() >= -tol &&
           x.maxCoeff() <= fd_.jam_density + tol;
  }

 private:
  void check_section(int i) const {
    if (i < 1 || i > topo_.sections)
      throw ModelError("section index " + std::to_string(i) + " out of range");
  }

  void check_state(const Eigen::VectorXd& x, const char* where) const {
    if (x.size() != state_dim())
      throw ModelError(std::string(where) + ": state has wrong dimension");
    if (!in_domain(x))
      throw DomainViolation(std::string(where) + ": density outside [0, jam]");
  }

  FundamentalDiagram fd_;
  HighwayTopology topo_;
};

}  // namespace actm
