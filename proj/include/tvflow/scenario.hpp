#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvflow/stack_dynamics.hpp"

namespace tvflow {

/// Evolution input. kind is "ball", "stack", or "state" (a restart written
/// by write_events_json, which may carry n = 2 bending regions).
struct Scenario {
  Dimension dim{1};
  std::string kind = "stack";
  std::vector<double> radii;
  std::vector<double> values;
  double t_end = 0.0;
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<double> outputs;
  EvolutionState initial;
};

/// Validates and builds the initial state. Throws a Domain error on bad input.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

nlohmann::json state_to_json(const EvolutionState& s);
EvolutionState state_from_json(const nlohmann::json& doc);

Trajectory run_scenario(const Scenario& sc);

/// Columns t, mass, tv, a0.., R0..; entries absent after events are left
/// empty. Ball scenarios add a_exact, R_exact.
void write_trajectory_csv(std::ostream& os, const Scenario& sc, const Trajectory& tr);

/// Radii at which a snapshot is sampled: a uniform grid over the support,
/// and points just inside and outside every interface.
std::vector<double> profile_radii(const EvolutionState& s, std::size_t count = 400);

/// Rows t, r, u (plus u_exact for ball scenarios).
void write_profile_csv(std::ostream& os, const Scenario& sc, const EvolutionState& s);

/// Events with their post-event state as restart scenarios, plus the final
/// state and extinction time.
nlohmann::json events_json(const Scenario& sc, const Trajectory& tr);

/// Writes <prefix>_trajectory.csv, <prefix>_profile_<i>.csv and
/// <prefix>_events.json; returns the file names.
std::vector<std::string> write_outputs(const std::string& prefix, const Scenario& sc,
                                       const Trajectory& tr);

/// 17 significant digits, the way every CSV number is written.
std::string format_number(double x);

}  // namespace tvflow
