#pragma once

#include <cmath>
#include <sstream>

#include "actm_observer/errors.hpp"

namespace actm {

/// Triangular flux-density map. SI units: m/s for speeds, veh/m for densities.
struct FundamentalDiagram {
  double free_flow_speed = 0.0;
  double wave_speed = 0.0;
  double critical_density = 0.0;
  double jam_density = 0.0;

  // Relative mismatch tolerated between the two branches at the critical
  // density. Published constants are rounded unit conversions and miss exact
  // continuity by ~0.5%.
  static constexpr double kContinuityTolerance = 0.02;

  /// Maximum flow v_f * rho_c.
  double capacity() const { return free_flow_speed * critical_density; }

  /// psi(rho): free-flow branch below rho_c, congested branch above.
  double flux(double density) const {
    if (density <= critical_density) return free_flow_speed * density;
    return wave_speed * (jam_density - density);
  }

  void validate() const {
    std::ostringstream msg;
    if (!(free_flow_speed > 0.0)) msg << "free_flow_speed must be positive; ";
    if (!(wave_speed > 0.0)) msg << "wave_speed must be positive; ";
    if (!(critical_density > 0.0 && critical_density < jam_density))
      msg << "need 0 < critical_density < jam_density; ";
    if (msg.str().empty()) {
      const double free = capacity();
      const double congested = wave_speed * (jam_density - critical_density);
      if (std::abs(free - congested) > kContinuityTolerance * free)
        msg << "branches disagree at critical density (" << free << " vs "
            << congested << "); ";
    }
    if (!msg.str().empty()) throw ModelError("fundamental diagram: " + msg.str());
  }
};

}  // namespace actm
