#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace formctl {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Agents are 1-indexed; leaders always occupy indices 1..m.
using AgentId = int;

// Numerical thresholds shared across the library. Geometric degeneracy
// tests are separated from floating-point noise by these values.
struct Tolerances {
    double rank = 1e-8;       // relative singular-value cutoff for rank tests
    double wii = 1e-9;        // |h_ii| below this is treated as unlocalizable
    double coincide = 1e-9;   // distance below this counts as coincident agents
    double angle = 1e-6;      // radians; angle equality / triangle degeneracy
    double bearing = 1e-8;    // bearing equality test
    double psd_scale = 1e-8;  // eigenvalue clamp scale for the distance embedding
};

inline int sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace formctl
