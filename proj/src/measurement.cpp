#include "formctl/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace formctl {

bool frame_dependent(MeasurementKind kind) {
    return kind == MeasurementKind::RelativePosition || kind == MeasurementKind::Bearing;
}

void validate_model(const MeasurementModel& model) {
    if (model.frame == Frame::Local && !frame_dependent(model.kind))
        throw ValidationError(to_string(model.kind) + " measurements carry no frame");
}

std::string to_string(MeasurementKind kind) {
    switch (kind) {
        case MeasurementKind::RelativePosition: return "relative_position";
        case MeasurementKind::Bearing: return "bearing";
        case MeasurementKind::Distance: return "distance";
        case MeasurementKind::Angle: return "angle";
        case MeasurementKind::RatioOfDistance: return "ratio_of_distance";
    }
    return "?";
}

std::string to_string(Frame frame) {
    return frame == Frame::Global ? "global" : "local";
}

MeasurementKind measurement_kind_from_string(const std::string& s) {
    if (s == "relative_position") return MeasurementKind::RelativePosition;
    if (s == "bearing") return MeasurementKind::Bearing;
    if (s == "distance") return MeasurementKind::Distance;
    if (s == "angle") return MeasurementKind::Angle;
    if (s == "ratio_of_distance" || s == "ratio") return MeasurementKind::RatioOfDistance;
    throw ValidationError("unknown measurement kind: " + s);
}

double angles_from_bearings(const Vector& g_a, const Vector& g_b) {
    if (std::abs(g_a.norm() - 1.0) > 1e-9 || std::abs(g_b.norm() - 1.0) > 1e-9)
        throw NotUnit("bearing vectors must have unit norm");
    const double dot = std::clamp(g_a.dot(g_b), -1.0, 1.0);
    return std::acos(dot);
}

namespace {

Matrix frame_of(const std::map<AgentId, Matrix>& frames, AgentId agent, int d) {
    auto it = frames.find(agent);
    if (it == frames.end()) return Matrix::Identity(d, d);
    if (it->second.rows() != d || it->second.cols() != d)
        throw DimensionMismatch("local frame of agent " + std::to_string(agent) +
                                " has the wrong shape");
    return it->second;
}

}  // namespace

MeasurementSnapshot synthesize_snapshot(const Matrix& true_positions,
                                        const std::map<AgentId, NeighborState>& estimates,
                                        const FormationGraph& graph, AgentId follower,
                                        const MeasurementModel& model,
                                        const std::map<AgentId, Matrix>& local_frames,
                                        double t, const Tolerances& tol) {
    validate_model(model);
    if (!graph.is_follower(follower))
        throw ValidationError("agent " + std::to_string(follower) + " is not a follower");
    if (!true_positions.allFinite())
        throw ValidationError("true positions contain non-finite values");

    const int d = graph.d;
    const auto& declared = graph.neighbors(follower);
    std::vector<AgentId> nbrs(declared.begin(), declared.begin() + d + 1);

    MeasurementSnapshot snap;
    snap.follower = follower;
    snap.t = t;
    snap.kind = model.kind;
    snap.frame = model.frame;
    snap.neighbors = nbrs;
    for (AgentId j : nbrs) {
        auto it = estimates.find(j);
        if (it == estimates.end()) throw MissingNeighborEstimate(j);
        snap.estimates[j] = it->second;
    }

    // Tuple positions: follower first, then the designated neighbors.
    std::vector<AgentId> tuple{follower};
    tuple.insert(tuple.end(), nbrs.begin(), nbrs.end());
    const int nt = static_cast<int>(tuple.size());
    Matrix P(d, nt);
    for (int k = 0; k < nt; ++k) P.col(k) = true_positions.row(tuple[k] - 1).transpose();

    auto require_separated = [&](int a, int b) {
        if ((P.col(a) - P.col(b)).norm() <= tol.coincide)
            throw CoincidentAgents(tuple[a], tuple[b]);
    };

    switch (model.kind) {
        case MeasurementKind::RelativePosition: {
            Matrix Qi = model.frame == Frame::Local
                            ? frame_of(local_frames, follower, d)
                            : Matrix::Identity(d, d);
            snap.relative_positions.resize(d, d + 1);
            for (int k = 0; k < d + 1; ++k)
                snap.relative_positions.col(k) = Qi.transpose() * (P.col(k + 1) - P.col(0));
            break;
        }
        case MeasurementKind::Bearing: {
            for (int a = 0; a < nt; ++a)
                for (int b = a + 1; b < nt; ++b) require_separated(a, b);
            snap.bearings.assign(nt, Matrix::Zero(d, nt));
            for (int v = 0; v < nt; ++v) {
                Matrix Qv = model.frame == Frame::Local
                                ? frame_of(local_frames, tuple[v], d)
                                : Matrix::Identity(d, d);
                for (int u = 0; u < nt; ++u) {
                    if (u == v) continue;
                    Vector e = P.col(u) - P.col(v);
                    snap.bearings[v].col(u) = Qv.transpose() * (e / e.norm());
                }
            }
            break;
        }
        case MeasurementKind::Angle: {
            for (int a = 0; a < nt; ++a)
                for (int b = a + 1; b < nt; ++b) require_separated(a, b);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            snap.angles.assign(nt, Matrix::Constant(nt, nt, nan));
            for (int v = 0; v < nt; ++v) {
                for (int a = 0; a < nt; ++a) {
                    if (a == v) continue;
                    Vector ga = (P.col(a) - P.col(v)).normalized();
                    for (int b = 0; b < nt; ++b) {
                        if (b == v || b == a) continue;
                        Vector gb = (P.col(b) - P.col(v)).normalized();
                        snap.angles[v](a, b) = angles_from_bearings(ga, gb);
                    }
                    snap.angles[v](a, a) = 0.0;
                }
            }
            break;
        }
        case MeasurementKind::Distance: {
            snap.own_distances.resize(d + 1);
            for (int k = 0; k < d + 1; ++k)
                snap.own_distances(k) = (P.col(k + 1) - P.col(0)).norm();
            snap.neighbor_sq_distances = Matrix::Zero(d + 1, d + 1);
            for (int a = 0; a < d + 1; ++a)
                for (int b = 0; b < d + 1; ++b) {
                    if (a == b) continue;
                    const Vector diff =
                        snap.estimates[nbrs[a]].p_hat - snap.estimates[nbrs[b]].p_hat;
                    snap.neighbor_sq_distances(a, b) = diff.squaredNorm();
                }
            break;
        }
        case MeasurementKind::RatioOfDistance: {
            require_separated(1, 2);  // reference pair (j0, j1), true positions
            const double ref_true = (P.col(1) - P.col(2)).squaredNorm();
            const double ref_est = (snap.estimates[nbrs[0]].p_hat -
                                    snap.estimates[nbrs[1]].p_hat).squaredNorm();
            if (ref_est <= tol.coincide * tol.coincide)
                throw CoincidentAgents(nbrs[0], nbrs[1]);
            snap.own_sq_ratios.resize(d + 1);
            for (int k = 0; k < d + 1; ++k)
                snap.own_sq_ratios(k) = (P.col(k + 1) - P.col(0)).squaredNorm() / ref_true;
            snap.neighbor_sq_ratios = Matrix::Zero(d + 1, d + 1);
            for (int a = 0; a < d + 1; ++a)
                for (int b = 0; b < d + 1; ++b) {
                    if (a == b) continue;
                    const Vector diff =
                        snap.estimates[nbrs[a]].p_hat - snap.estimates[nbrs[b]].p_hat;
                    snap.neighbor_sq_ratios(a, b) = diff.squaredNorm() / ref_est;
                }
            break;
        }
    }
    return snap;
}

}  // namespace formctl
