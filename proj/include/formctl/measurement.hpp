#pragma once

#include "formctl/errors.hpp"
#include "formctl/graph.hpp"
#include "formctl/types.hpp"

#include <map>
#include <vector>

namespace formctl {

enum class MeasurementKind { RelativePosition, Bearing, Distance, Angle, RatioOfDistance };
enum class Frame { Global, Local };

// Distance, angle and ratio measurements carry no frame.
bool frame_dependent(MeasurementKind kind);

struct MeasurementModel {
    MeasurementKind kind = MeasurementKind::RelativePosition;
    Frame frame = Frame::Global;
};

// Throws ValidationError if a Local frame is requested for a
// frame-independent kind.
void validate_model(const MeasurementModel& model);

std::string to_string(MeasurementKind kind);
std::string to_string(Frame frame);
MeasurementKind measurement_kind_from_string(const std::string& s);

struct NeighborState {
    Vector p_hat;
    Vector v_hat;
    bool arrived = false;
};

// Everything one follower's sensors and inbound edges deliver at an instant.
// Tuple order throughout: index 0 is the follower, 1..d+1 its designated
// neighbors in designated order. Only the fields of the active kind are set.
struct MeasurementSnapshot {
    AgentId follower = 0;
    double t = 0.0;
    MeasurementKind kind = MeasurementKind::RelativePosition;
    Frame frame = Frame::Global;
    std::vector<AgentId> neighbors;

    // RelativePosition: column k is the relative position to neighbor k,
    // expressed in the follower's own frame when Local.
    Matrix relative_positions;

    // Bearing: bearings[v] is d x (d+2); column u is the unit vector from
    // tuple agent v toward tuple agent u in v's frame (column v unused).
    std::vector<Matrix> bearings;

    // Angle: angles[v](a, b) is the angle at tuple agent v between the rays
    // toward tuple agents a and b. Entries touching v itself are NaN.
    std::vector<Matrix> angles;

    // Distance: own distances are sensed; the distances among neighbors are
    // computed from their transmitted position estimates.
    Vector own_distances;          // d+1
    Matrix neighbor_sq_distances;  // (d+1) x (d+1)

    // RatioOfDistance: squared ratios against the reference pair (j0, j1);
    // own entries sensed, neighbor entries from transmitted estimates.
    Vector own_sq_ratios;          // d+1
    Matrix neighbor_sq_ratios;     // (d+1) x (d+1)

    std::map<AgentId, NeighborState> estimates;
};

// arccos of the clamped inner product of two unit vectors.
double angles_from_bearings(const Vector& g_a, const Vector& g_b);

// Builds the snapshot follower i would obtain at time t. true_positions has
// one agent per row; local_frames supplies each agent's rotation when the
// model is Local (identity when absent).
MeasurementSnapshot synthesize_snapshot(const Matrix& true_positions,
                                        const std::map<AgentId, NeighborState>& estimates,
                                        const FormationGraph& graph, AgentId follower,
                                        const MeasurementModel& model,
                                        const std::map<AgentId, Matrix>& local_frames = {},
                                        double t = 0.0, const Tolerances& tol = {});

}  // namespace formctl
