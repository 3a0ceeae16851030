#pragma once

#include "formctl/control.hpp"
#include "formctl/displacement.hpp"
#include "formctl/formation.hpp"
#include "formctl/graph.hpp"
#include "formctl/measurement.hpp"
#include "formctl/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace formctl {

struct ScenarioConfig {
    std::string name;
    NominalFormation nominal;
    ManeuverSchedule schedule;
    std::map<AgentId, MeasurementModel> follower_models;
    std::map<AgentId, Matrix> local_frames;  // per-agent rotation for Local kinds
    ControlGains gains;
    Tolerances tol;
    double dt = 1e-3;
    double t_end = 10.0;
    double eps = 1e-3;          // arrival threshold
    Matrix initial_positions;   // n x d; defaults to the target at t = 0
    Matrix initial_estimates;   // n x d; follower rows; defaults to the true start
    std::uint64_t seed = 0;     // reserved for randomized initialization
    int log_stride = 1;
};

struct SimState {
    double t = 0.0;
    Matrix p;      // n x d
    Matrix p_hat;  // n x d (leader rows mirror p)
};

struct Sample {
    double t = 0.0;
    Matrix p, p_hat, u;
    std::vector<Mode> mode;
    Vector err_track;  // ||p_i - p*_i||
    Vector err_est;    // followers: ||p_hat_i - p_i||
    Vector err_bar;    // followers: ||p_i - Sum (w/w_ii) p_hat_j||
};

enum class EventKind { Arrived, SwitchToManeuvering, SwitchToMaintaining };

std::string to_string(EventKind kind);

struct Event {
    double t = 0.0;
    AgentId agent = 0;
    EventKind kind = EventKind::Arrived;
};

// Control input on both sides of a follower mode switch, one step apart.
struct SwitchRecord {
    double t = 0.0;
    AgentId agent = 0;
    Mode from = Mode::Maintaining, to = Mode::Maneuvering;
    Vector u_before, u_after;
};

struct TrajectoryLog {
    int n = 0, m = 0, d = 0;
    double dt = 0.0;
    std::vector<Sample> samples;
    std::vector<Event> events;
    std::vector<SwitchRecord> switches;
    std::map<AgentId, double> arrival_time;
};

// One classical Runge-Kutta step on the stacked true/estimate dynamics.
// Measurements and live constraints are re-evaluated at every internal
// stage; modes and arrival flags stay frozen over [t, t+dt).
// Returns the new state plus the first-stage evaluation (the control that
// was applied at t).
struct StepResult {
    SimState next;
    Matrix u;          // n x d control at the step start
    Matrix p_hat_dot;  // n x d estimate derivative at the step start
};

StepResult rk4_step(const SimState& state, double dt, const ScenarioConfig& scenario,
                    const std::vector<Mode>& modes, const std::vector<bool>& arrived);

// Full run: per step evaluate targets, snapshots, constraints and
// controllers, integrate, then refresh arrival flags and modes with a
// one-step information delay.
TrajectoryLog run_scenario(const ScenarioConfig& scenario);

struct AgentMetrics {
    double peak_track = 0.0, peak_est = 0.0, peak_bar = 0.0;
    double settle_time = 0.0;                // errors stay below eps from here on
    double arrival_time = -1.0;              // negative when never arrived
    double max_maintaining_increase = 0.0;   // of ||(e_bar, e_hat)|| per logged step
    double max_switch_jump = 0.0;
};

struct Metrics {
    std::map<AgentId, AgentMetrics> agents;
};

Metrics error_metrics(const TrajectoryLog& log, double eps);

}  // namespace formctl
