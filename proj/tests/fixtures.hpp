#pragma once

#include <vector>

#include "actm_observer/actm.hpp"

namespace fixtures {

inline actm::FundamentalDiagram reference_fd() {
  return {28.8889, 6.6667, 0.0249, 0.1333};
}

inline std::vector<int> one_to(int n) {
  std::vector<int> v;
  for (int i = 1; i <= n; ++i) v.push_back(i);
  return v;
}

/// Ten sections, both ramps everywhere, 13 detectors.
inline actm::HighwayTopology reference_topology() {
  using actm::SensorSite;
  actm::HighwayTopology t;
  t.sections = 10;
  t.onramp_sections = one_to(10);
  t.offramp_sections = one_to(10);
  t.cell_length = 200.0;
  t.time_step = 1.0;
  for (int s : {2, 5, 10}) t.sensors.push_back({SensorSite::kSection, s});
  for (int s : {2, 4, 5, 7, 9}) t.sensors.push_back({SensorSite::kOnRamp, s});
  for (int s : {1, 3, 6, 8, 10}) t.sensors.push_back({SensorSite::kOffRamp, s});
  return t;
}

inline actm::ExogenousInput uniform_input(const actm::HighwayTopology& t, double flow, double beta) {
  actm::ExogenousInput u;
  u.upstream_demand = flow;
  u.downstream_supply = flow;
  u.onramp_demand.assign(t.onramp_sections.size(), flow);
  u.offramp_capacity.assign(t.offramp_sections.size(), flow);
  u.split_ratio.assign(t.offramp_sections.size(), beta);
  return u;
}

}  // namespace fixtures
