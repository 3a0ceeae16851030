#pragma once

#include "formctl/errors.hpp"
#include "formctl/graph.hpp"
#include "formctl/types.hpp"

#include <map>
#include <vector>

namespace formctl {

// True iff the points (columns of a d x k matrix, k >= d+1) are not contained
// in any hyperplane: the differences from the first point span R^d.
bool check_general_position(const Matrix& points, const Tolerances& tol = {});

// Displacement parameters of one follower's nominal constraint, normalized to
// unit Euclidean norm with the sign fixed so that w_ii > 0.
struct FollowerWeights {
    std::vector<AgentId> neighbors;  // the designated d+1, in order
    Vector w;                        // one weight per designated neighbor
    double w_ii = 0.0;               // sum of the weights
};

using WeightMap = std::map<AgentId, FollowerWeights>;

// Solves the nominal constraint of every follower: the weight vector spans
// the nullspace of [r_j0 - r_i | ... | r_jd - r_i]. Positions are rows of r.
WeightMap compute_nominal_weights(const Matrix& r, const FormationGraph& graph,
                                  const Tolerances& tol = {});

// Follower matrix, partitioned into leader columns and follower columns.
// Row i has -w_ij at designated neighbors and w_ii on the diagonal block.
std::pair<Matrix, Matrix> assemble_follower_matrices(const WeightMap& weights,
                                                     const FormationGraph& graph);

// True iff every diagonal entry of the (lower triangular) follower-follower
// block has magnitude above tolerance, i.e. the block is safely invertible.
bool check_localizability(const Matrix& omega_ff, const Tolerances& tol = {});

// r_f = -(omega_ff^-1 omega_fl (x) I_d) r_l by forward substitution.
// Leader positions are the rows of r_l (m x d); returns (n-m) x d.
Matrix solve_nominal_followers(const Matrix& omega_fl, const Matrix& omega_ff,
                               const Matrix& r_l, const Tolerances& tol = {});

struct NominalFormation {
    FormationGraph graph;
    Matrix r;  // n x d nominal configuration, one agent per row
    WeightMap weights;
    Matrix omega_fl;  // (n-m) x m
    Matrix omega_ff;  // (n-m) x (n-m), lower triangular
};

// Computes weights and follower matrices for a nominal configuration and
// verifies the row-sum identity and localizability.
NominalFormation make_nominal_formation(const FormationGraph& graph, const Matrix& r,
                                        const Tolerances& tol = {});

// --- time-varying maneuver parameters -------------------------------------

// Scalar parameter over one schedule piece with a closed-form derivative.
struct ScalarSpec {
    enum class Kind { Constant, Linear, Sinusoid };
    Kind kind = Kind::Constant;
    double value = 1.0;             // Constant
    double from = 1.0, to = 1.0;    // Linear (endpoint values over the piece)
    double offset = 0.0, amplitude = 0.0, omega = 0.0, phase = 0.0;  // Sinusoid
};

struct VectorSpec {
    enum class Kind { Constant, Linear, Sinusoid };
    Kind kind = Kind::Constant;
    Vector value;         // Constant
    Vector from, to;      // Linear
    Vector offset, amplitude;  // Sinusoid (shared omega/phase)
    double omega = 0.0, phase = 0.0;
};

// Planar rotation at a fixed angular rate in the (axis_a, axis_b) coordinate
// plane, starting from angle0 at the beginning of the piece.
struct RotationSpec {
    int axis_a = 0, axis_b = 1;
    double angle0 = 0.0;
    double rate = 0.0;
};

struct SchedulePiece {
    double t_start = 0.0, t_end = 0.0;
    ScalarSpec beta;
    RotationSpec rot;
    VectorSpec delta;
};

struct ManeuverSchedule {
    std::vector<SchedulePiece> pieces;
    double t_end() const { return pieces.empty() ? 0.0 : pieces.back().t_end; }
};

struct ManeuverState {
    double beta = 1.0, dbeta = 0.0;
    Matrix Q, dQ;
    Vector delta, ddelta;
};

// Checks that pieces tile [0, T] without gaps, beta stays positive, the
// rotation is proper, and the assembled parameters are continuous across
// boundaries (value mismatch <= 1e-9).
void validate_schedule(const ManeuverSchedule& schedule, int d);

// Evaluates the active piece at t with the right-derivative convention at
// boundaries: the piece whose interval starts at t supplies the derivative.
ManeuverState evaluate_maneuver(const ManeuverSchedule& schedule, int d, double t);

// p*_i(t) = beta(t) Q(t) r_i + delta(t) for all agents (rows), along with the
// product-rule derivative. Verifies the follower block against the
// leader-determined solution as an internal consistency assertion.
struct TargetState {
    Matrix p;  // n x d
    Matrix v;  // n x d
};

TargetState target_configuration(const NominalFormation& nominal,
                                 const ManeuverSchedule& schedule, double t);

}  // namespace formctl
