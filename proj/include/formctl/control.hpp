#pragma once

#include "formctl/displacement.hpp"
#include "formctl/errors.hpp"
#include "formctl/formation.hpp"
#include "formctl/measurement.hpp"
#include "formctl/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace formctl {

struct ControlGains {
    double a1 = 2.0;
    double a2 = 2.0;
    double a3 = 0.5;  // power of the sig function, in (0, 1)
    double a4 = 2.0;
    bool continuity_mode = false;  // per-axis switching gains for a continuous input
    double xi_max_factor = 1e3;    // cap on the switching gain, in units of a2
    double eta_floor = 1e-9;       // below this the per-axis gain equation is singular
};

void validate_gains(const ControlGains& gains);

enum class Mode { Leader, Maintaining, Maneuvering };

std::string to_string(Mode mode);

// Per-agent simulation state.
struct AgentRuntime {
    AgentId id = 0;
    Vector p;       // true position
    Vector p_hat;   // position estimate (leaders: p_hat == p at all times)
    Vector v_hat;   // estimate derivative from the last evaluation
    Mode mode = Mode::Maintaining;
    bool arrived = false;  // latched arrival flag
    Vector last_u;
};

// Componentwise sgn(x_k) |x_k|^l with sig_pow(0, l) = 0.
Vector sig_pow(const Vector& x, double l);

// u = -a1 e - a2 sig^{a3}(e) + dp*/dt.
Vector leader_control(const Vector& tracking_error, const Vector& target_velocity,
                      const ControlGains& gains);

struct FollowerCommand {
    Vector u;
    Vector p_hat_dot;
};

// Maintaining mode: keeps the formation error bounded from neighbor
// estimates alone. With continuity_mode the scalar gain a1 is replaced per
// axis by the switching gain xi(eta).
FollowerCommand maintain_control(const Vector& p_hat_i,
                                 const std::map<AgentId, NeighborState>& estimates,
                                 const FollowerWeights& weights, const ControlGains& gains);

// Maneuvering mode: drives self-localization and the formation error to zero
// in finite time using the live displacement constraint.
// Throws NotLocalizable when the constraint cannot localize the follower.
FollowerCommand maneuver_control(const Vector& p_hat_i,
                                 const std::map<AgentId, NeighborState>& estimates,
                                 const FollowerWeights& weights,
                                 const DisplacementConstraint& constraint,
                                 const ControlGains& gains,
                                 const Tolerances& tol = {});

// Per-axis maintaining gains xi solving xi_k/a2 * eta_k = eta_k + sig(eta_k),
// capped where the equation becomes singular.
Vector continuity_gains(const Vector& eta, const ControlGains& gains);

// Maneuvering iff every designated neighbor reported arrival (flags are from
// the previous step; one-step information delay).
Mode update_mode(const std::vector<bool>& neighbor_arrived);

// Leaders complete their task when the tracking error falls below eps.
// Arrival latches; it releases only when the error exceeds 10 eps.
bool leader_arrival(const Vector& tracking_error, double eps, bool was_arrived);

// Follower task-completion test: (a) live and nominal barycentric mixes of
// the neighbor estimates agree, (b) the own estimate satisfies the live
// constraint, (c) every designated neighbor's arrived flag is set. Latched
// arrivals release only when a residual exceeds 10 eps.
// Throws NotLocalizable if (c) holds but the constraint cannot localize.
bool follower_arrival(const Vector& p_hat_i,
                      const std::map<AgentId, NeighborState>& estimates,
                      const FollowerWeights& weights,
                      const DisplacementConstraint& constraint, double eps,
                      bool was_arrived, const Tolerances& tol = {});

// Closed-loop error matrices of the two follower modes, for analysis:
// maintaining ones scale with a1, maneuvering couples a2 and a4.
Matrix maintaining_error_matrix(const ControlGains& gains, int d);
Matrix maneuvering_error_matrix(const ControlGains& gains, int d);

}  // namespace formctl
