#pragma once

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actm_observer/errors.hpp"
#include "actm_observer/fundamental_diagram.hpp"

namespace actm {

enum class SensorSite { kSection, kOnRamp, kOffRamp };

/// A detector on section `section` (1-based), or on the ramp attached to it.
struct Sensor {
  SensorSite site = SensorSite::kSection;
  int section = 1;

  friend bool operator==(const Sensor&, const Sensor&) = default;
};

/// Layout of a single stretched highway with ramps.
///
/// Sections are numbered 1..N in the driving direction. The state vector
/// stacks section densities, then on-ramp densities in ascending section
/// order, then off-ramp densities in ascending section order; state entries
/// are addressed with 0-based indices.
struct HighwayTopology {
  int sections = 0;
  std::vector<int> onramp_sections;
  std::vector<int> offramp_sections;
  double cell_length = 0.0;
  double time_step = 0.0;
  // One occupancy parameter per on-ramp (same order as onramp_sections).
  // Empty means every ramp uses the congestion wave speed.
  std::vector<double> onramp_occupancy;
  std::vector<Sensor> sensors;

  int onramp_count() const { return static_cast<int>(onramp_sections.size()); }
  int offramp_count() const { return static_cast<int>(offramp_sections.size()); }
  int state_dim() const { return sections + onramp_count() + offramp_count(); }
  int input_dim() const { return 2 + onramp_count() + offramp_count(); }

  /// Position of `section` in the on-ramp list, or -1.
  int onramp_slot(int section) const { return slot_of(onramp_sections, section); }
  int offramp_slot(int section) const { return slot_of(offramp_sections, section); }
  bool has_onramp(int section) const { return onramp_slot(section) >= 0; }
  bool has_offramp(int section) const { return offramp_slot(section) >= 0; }

  int section_state(int section) const { return section - 1; }
  int onramp_state(int section) const { return sections + onramp_slot(section); }
  int offramp_state(int section) const {
    return sections + onramp_count() + offramp_slot(section);
  }

  double courant_number(const FundamentalDiagram& fd) const {
    return fd.free_flow_speed * time_step / cell_length;
  }

  double occupancy(int slot, const FundamentalDiagram& fd) const {
    return onramp_occupancy.empty() ? fd.wave_speed : onramp_occupancy.at(slot);
  }

  /// 0-based state index measured by `sensor`.
  int sensor_state(const Sensor& sensor) const {
    if (sensor.section < 1 || sensor.section > sections)
      throw ModelError("sensor on nonexistent section " + std::to_string(sensor.section));
    switch (sensor.site) {
      case SensorSite::kSection:
        return section_state(sensor.section);
      case SensorSite::kOnRamp:
        if (!has_onramp(sensor.section))
          throw ModelError("sensor on missing on-ramp of section " +
                           std::to_string(sensor.section));
        return onramp_state(sensor.section);
      case SensorSite::kOffRamp:
        if (!has_offramp(sensor.section))
          throw ModelError("sensor on missing off-ramp of section " +
                           std::to_string(sensor.section));
        return offramp_state(sensor.section);
    }
    throw ModelError("unknown sensor site");
  }

  /// Measured state indices in sensor order. Rejects empty or duplicate lists.
  std::vector<int> sensor_states() const {
    if (sensors.empty()) throw ModelError("no sensors configured");
    std::vector<int> out;
    std::set<int> seen;
    for (const auto& s : sensors) {
      const int idx = sensor_state(s);
      if (!seen.insert(idx).second)
        throw ModelError("duplicate sensor at state index " + std::to_string(idx));
      out.push_back(idx);
    }
    return out;
  }

  void validate(const FundamentalDiagram& fd) const {
    std::ostringstream msg;
    if (sections < 1) msg << "need at least one section; ";
    check_ramp_list(onramp_sections, "onramp", msg);
    check_ramp_list(offramp_sections, "offramp", msg);
    if (!(cell_length > 0.0)) msg << "cell_length must be positive; ";
    if (!(time_step > 0.0)) msg << "time_step must be positive; ";
    if (msg.str().empty() && courant_number(fd) > 1.0)
      msg << "CFL violated: v_f*T/l = " << courant_number(fd) << " > 1; ";
    if (!onramp_occupancy.empty()) {
      if (onramp_occupancy.size() != onramp_sections.size())
        msg << "onramp_occupancy needs one value per on-ramp; ";
      for (double xi : onramp_occupancy)
        if (!(xi >= 0.0 && xi <= fd.wave_speed))
          msg << "on-ramp occupancy " << xi << " outside [0, wave_speed]; ";
    }
    if (!msg.str().empty()) throw ModelError("topology: " + msg.str());
  }

 private:
  static int slot_of(const std::vector<int>& list, int section) {
    const auto it = std::lower_bound(list.begin(), list.end(), section);
    if (it == list.end() || *it != section) return -1;
    return static_cast<int>(it - list.begin());
  }

  void check_ramp_list(const std::vector<int>& list, const char* name,
                       std::ostringstream& msg) const {
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k] < 1 || list[k] > sections)
        msg << name << " section " << list[k] << " out of range; ";
      if (k > 0 && list[k] <= list[k - 1])
        msg << name << " sections must be strictly increasing; ";
    }
  }
};

}  // namespace actm
