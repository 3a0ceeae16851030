#include "formctl/control.hpp"

#include <cmath>

namespace formctl {

void validate_gains(const ControlGains& g) {
    if (!(g.a1 > 0.0) || !(g.a2 > 0.0) || !(g.a4 > 0.0))
        throw ValidationError("control gains a1, a2, a4 must be positive");
    if (!(g.a3 > 0.0 && g.a3 < 1.0))
        throw ValidationError("control gain a3 must lie in (0, 1)");
    if (!(g.xi_max_factor > 0.0) || !(g.eta_floor > 0.0))
        throw ValidationError("continuity gain cap and floor must be positive");
}

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::Leader: return "L";
        case Mode::Maintaining: return "MT";
        case Mode::Maneuvering: return "MV";
    }
    return "?";
}

Vector sig_pow(const Vector& x, double l) {
    Vector out(x.size());
    for (int k = 0; k < x.size(); ++k)
        out(k) = sgn(x(k)) * std::pow(std::abs(x(k)), l);
    return out;
}

Vector leader_control(const Vector& tracking_error, const Vector& target_velocity,
                      const ControlGains& gains) {
    return -gains.a1 * tracking_error - gains.a2 * sig_pow(tracking_error, gains.a3) +
           target_velocity;
}

namespace {

// Sum_j (w_ij / w_ii) p_hat_j and the matching velocity mix.
struct NeighborMix {
    Vector p;
    Vector v;
};

NeighborMix mix_estimates(const std::map<AgentId, NeighborState>& estimates,
                          const std::vector<AgentId>& neighbors, const Vector& coeff,
                          double denom, int d) {
    NeighborMix mix{Vector::Zero(d), Vector::Zero(d)};
    for (size_t k = 0; k < neighbors.size(); ++k) {
        auto it = estimates.find(neighbors[k]);
        if (it == estimates.end()) throw MissingNeighborEstimate(neighbors[k]);
        const double c = coeff(static_cast<int>(k)) / denom;
        mix.p += c * it->second.p_hat;
        mix.v += c * it->second.v_hat;
    }
    return mix;
}

}  // namespace

Vector continuity_gains(const Vector& eta, const ControlGains& gains) {
    const double xi_max = gains.xi_max_factor * gains.a2;
    Vector xi(eta.size());
    for (int k = 0; k < eta.size(); ++k) {
        const double mag = std::abs(eta(k));
        if (mag < gains.eta_floor) {
            xi(k) = xi_max;
        } else {
            xi(k) = std::min(gains.a2 * (1.0 + std::pow(mag, gains.a3 - 1.0)), xi_max);
        }
    }
    return xi;
}

FollowerCommand maintain_control(const Vector& p_hat_i,
                                 const std::map<AgentId, NeighborState>& estimates,
                                 const FollowerWeights& weights, const ControlGains& gains) {
    const int d = static_cast<int>(p_hat_i.size());
    NeighborMix mix = mix_estimates(estimates, weights.neighbors, weights.w, weights.w_ii, d);
    const Vector consensus = mix.p - p_hat_i;  // Sum (w/w_ii) p_hat_j - p_hat_i

    FollowerCommand cmd;
    if (gains.continuity_mode) {
        const Vector xi = continuity_gains(gains.a2 * consensus, gains);
        cmd.u = xi.cwiseProduct(consensus) + mix.v;
        cmd.p_hat_dot = 2.0 * xi.cwiseProduct(consensus) + mix.v;
    } else {
        cmd.u = gains.a1 * consensus + mix.v;
        cmd.p_hat_dot = 2.0 * gains.a1 * consensus + mix.v;
    }
    return cmd;
}

FollowerCommand maneuver_control(const Vector& p_hat_i,
                                 const std::map<AgentId, NeighborState>& estimates,
                                 const FollowerWeights& weights,
                                 const DisplacementConstraint& constraint,
                                 const ControlGains& gains, const Tolerances& tol) {
    if (!constraint.localizable || std::abs(constraint.h_ii) <= tol.wii)
        throw NotLocalizable(constraint.follower);
    const int d = static_cast<int>(p_hat_i.size());
    NeighborMix nominal =
        mix_estimates(estimates, weights.neighbors, weights.w, weights.w_ii, d);
    NeighborMix live = mix_estimates(estimates, constraint.neighbors,
                                     constraint.coefficients, constraint.h_ii, d);

    const Vector eta = gains.a2 * (nominal.p - p_hat_i);
    const Vector sigma = gains.a4 * (live.p - p_hat_i);

    FollowerCommand cmd;
    cmd.u = eta + nominal.v + sig_pow(eta, gains.a3);
    cmd.p_hat_dot = 2.0 * eta + sigma + nominal.v + sig_pow(eta, gains.a3) +
                    sig_pow(eta + sigma, gains.a3);
    return cmd;
}

Mode update_mode(const std::vector<bool>& neighbor_arrived) {
    for (bool a : neighbor_arrived)
        if (!a) return Mode::Maintaining;
    return Mode::Maneuvering;
}

bool leader_arrival(const Vector& tracking_error, double eps, bool was_arrived) {
    const double err = tracking_error.norm();
    if (was_arrived) return err <= 10.0 * eps;
    return err <= eps;
}

bool follower_arrival(const Vector& p_hat_i,
                      const std::map<AgentId, NeighborState>& estimates,
                      const FollowerWeights& weights,
                      const DisplacementConstraint& constraint, double eps,
                      bool was_arrived, const Tolerances& tol) {
    bool neighbors_done = true;
    for (AgentId j : weights.neighbors) {
        auto it = estimates.find(j);
        if (it == estimates.end()) throw MissingNeighborEstimate(j);
        if (!it->second.arrived) neighbors_done = false;
    }
    if (!neighbors_done) return was_arrived;  // latched arrivals release on residuals only

    if (!constraint.localizable || std::abs(constraint.h_ii) <= tol.wii)
        throw NotLocalizable(constraint.follower);

    const int d = static_cast<int>(p_hat_i.size());
    NeighborMix nominal =
        mix_estimates(estimates, weights.neighbors, weights.w, weights.w_ii, d);
    NeighborMix live = mix_estimates(estimates, constraint.neighbors,
                                     constraint.coefficients, constraint.h_ii, d);
    const double residual_mix = (live.p - nominal.p).norm();
    const double residual_own = (p_hat_i - live.p).norm();

    const double bound = was_arrived ? 10.0 * eps : eps;
    return residual_mix <= bound && residual_own <= bound;
}

namespace {

Matrix kron2_identity(double k11, double k12, double k21, double k22, int d) {
    Matrix M = Matrix::Zero(2 * d, 2 * d);
    const Matrix I = Matrix::Identity(d, d);
    M.topLeftCorner(d, d) = k11 * I;
    M.topRightCorner(d, d) = k12 * I;
    M.bottomLeftCorner(d, d) = k21 * I;
    M.bottomRightCorner(d, d) = k22 * I;
    return M;
}

}  // namespace

Matrix maintaining_error_matrix(const ControlGains& gains, int d) {
    return kron2_identity(gains.a1, gains.a1, gains.a1, gains.a1, d);
}

Matrix maneuvering_error_matrix(const ControlGains& gains, int d) {
    return kron2_identity(gains.a2, gains.a2, gains.a2, gains.a2 + gains.a4, d);
}

}  // namespace formctl
