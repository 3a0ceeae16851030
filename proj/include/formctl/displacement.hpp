#pragma once

#include "formctl/errors.hpp"
#include "formctl/measurement.hpp"
#include "formctl/types.hpp"

#include <vector>

namespace formctl {

// Real-time displacement constraint of one follower: coefficients h_ij over
// the designated neighbors with h_ii their sum. Coefficients are unit-norm
// with the sign fixed so the sum is positive (first nonzero entry positive
// when the sum vanishes). localizable means |h_ii| is safely nonzero.
struct DisplacementConstraint {
    AgentId follower = 0;
    std::vector<AgentId> neighbors;
    Vector coefficients;
    double h_ii = 0.0;
    bool localizable = false;
};

// Symmetric matrix of squared distances (or squared ratios) over the ordered
// tuple (i, j_0, ..., j_d); zero diagonal, nonnegative entries.
struct SquaredDistanceMatrix {
    Matrix M;
    static SquaredDistanceMatrix from(const Matrix& M);
};

struct MdsEmbedding {
    Matrix points;              // d x (d+2); columns in tuple order
    bool rank_deficient = false;  // configuration lies in a lower-dimensional flat
};

// Classical scaling: X = -1/2 J M J, symmetric eigendecomposition sorted
// descending (ties broken by original index), eigenvalues in [-tol, 0)
// clamped to zero, embedding from the top d eigenpairs. Pairwise distances of
// the returned columns reproduce sqrt(M) for consistent inputs.
// Throws NotEmbeddable when an eigenvalue falls below -tol.
MdsEmbedding mds_embed(const SquaredDistanceMatrix& M, int d, const Tolerances& tol = {});

// Right singular vector of the smallest singular value of E (d x (d+1)),
// normalized to unit norm, sign fixed so the coefficient sum is positive.
// Throws AmbiguousNullspace when the nullspace has dimension > 1.
Vector nullspace_coefficients(const Matrix& E, const Tolerances& tol = {});

// Full squared-ratio matrix over the tuple from per-vertex angle tables,
// via the sine rule around a pivot agent that forms a non-degenerate
// triangle with every pair of the others. The matrix is normalized by the
// squared distance of the pivot's reference edge.
Matrix ratios_from_angles(const std::vector<Matrix>& angles, const Tolerances& tol = {});

DisplacementConstraint h_from_relative_positions(const MeasurementSnapshot& snapshot,
                                                 const Tolerances& tol = {});
DisplacementConstraint h_from_distances(const MeasurementSnapshot& snapshot, int d,
                                        const Tolerances& tol = {});
DisplacementConstraint h_from_ratios(const MeasurementSnapshot& snapshot, int d,
                                     const Tolerances& tol = {});
DisplacementConstraint h_from_angles(const MeasurementSnapshot& snapshot, int d,
                                     const Tolerances& tol = {});
DisplacementConstraint h_from_bearings(const MeasurementSnapshot& snapshot, int d,
                                       const Tolerances& tol = {});

// Dispatch on the snapshot's kind.
DisplacementConstraint solve_displacement(const MeasurementSnapshot& snapshot, int d,
                                          const Tolerances& tol = {});

}  // namespace formctl
