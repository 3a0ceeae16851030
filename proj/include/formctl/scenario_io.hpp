#pragma once

#include "formctl/sim.hpp"

#include <iosfwd>
#include <string>

namespace formctl {

// Parses and fully validates a scenario file (see README for the format).
// Errors carry section and line context.
ScenarioConfig parse_scenario(const std::string& path);
ScenarioConfig parse_scenario_text(const std::string& text, const std::string& name);

// Inverse of parse_scenario up to formatting: parsing the result yields an
// equal configuration.
std::string serialize_scenario(const ScenarioConfig& config);

// Writes trajectory.csv, events.csv and summary.csv into out_dir.
// Floats carry 17 significant digits; lines end with LF.
void write_trajectory(const TrajectoryLog& log, const std::string& out_dir, double eps);

// Header of trajectory.csv for ambient dimension d.
std::string trajectory_header(int d);

}  // namespace formctl
