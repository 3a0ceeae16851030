#include "formctl/displacement.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace formctl {

namespace {

DisplacementConstraint make_constraint(const MeasurementSnapshot& snap, Vector h,
                                       const Tolerances& tol) {
    DisplacementConstraint c;
    c.follower = snap.follower;
    c.neighbors = snap.neighbors;
    c.coefficients = std::move(h);
    c.h_ii = c.coefficients.sum();
    c.localizable = std::abs(c.h_ii) > tol.wii;
    return c;
}

}  // namespace

SquaredDistanceMatrix SquaredDistanceMatrix::from(const Matrix& M) {
    if (M.rows() != M.cols()) throw ShapeError("squared-distance matrix must be square");
    const double scale = std::max(1.0, M.lpNorm<Eigen::Infinity>());
    if ((M - M.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * scale)
        throw ValidationError("squared-distance matrix is not symmetric");
    if (M.diagonal().lpNorm<Eigen::Infinity>() > 1e-12 * scale)
        throw ValidationError("squared-distance matrix has a nonzero diagonal");
    if (M.minCoeff() < 0.0)
        throw ValidationError("squared-distance matrix has negative entries");
    return SquaredDistanceMatrix{M};
}

MdsEmbedding mds_embed(const SquaredDistanceMatrix& Msq, int d, const Tolerances& tol) {
    const Matrix& M = Msq.M;
    const int nt = static_cast<int>(M.rows());
    if (nt < d + 1) throw ShapeError("distance matrix too small for the requested dimension");

    Matrix J = Matrix::Identity(nt, nt) - Matrix::Constant(nt, nt, 1.0 / nt);
    Matrix X = -0.5 * J * M * J;

    Eigen::SelfAdjointEigenSolver<Matrix> eig((X + X.transpose()) / 2.0);
    if (eig.info() != Eigen::Success) throw NotEmbeddable("eigendecomposition failed");

    // Descending order, ties broken by original index.
    std::vector<int> order(nt);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return eig.eigenvalues()(a) > eig.eigenvalues()(b);
    });

    const double psd_tol = tol.psd_scale * std::max(X.trace(), 0.0) / nt;
    Vector lambda(nt);
    for (int k = 0; k < nt; ++k) {
        double v = eig.eigenvalues()(order[k]);
        if (v < -psd_tol)
            throw NotEmbeddable("distance data is inconsistent (negative eigenvalue " +
                                std::to_string(v) + ")");
        lambda(k) = std::max(v, 0.0);
    }

    MdsEmbedding out;
    out.points.resize(d, nt);
    int positive = 0;
    for (int k = 0; k < d; ++k) {
        out.points.row(k) = std::sqrt(lambda(k)) * eig.eigenvectors().col(order[k]).transpose();
        if (lambda(k) > psd_tol) ++positive;
    }
    out.rank_deficient = positive < d;
    return out;
}

Vector nullspace_coefficients(const Matrix& E, const Tolerances& tol) {
    const int rows = static_cast<int>(E.rows());
    const int cols = static_cast<int>(E.cols());
    if (cols != rows + 1)
        throw ShapeError("coefficient solve expects d+1 columns for points in R^d");

    Eigen::JacobiSVD<Matrix> svd(E, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // One nullspace direction is guaranteed by the shape; a second appears
    // exactly when the smallest computed singular value also vanishes.
    if (sv(0) <= 0.0 || sv(rows - 1) <= tol.rank * sv(0))
        throw AmbiguousNullspace("nullspace dimension exceeds 1");

    Vector h = svd.matrixV().col(cols - 1);
    h.normalize();
    const double sum = h.sum();
    if (std::abs(sum) > tol.wii) {
        if (sum < 0.0) h = -h;
    } else {
        for (int k = 0; k < cols; ++k) {
            if (std::abs(h(k)) > tol.wii) {
                if (h(k) < 0.0) h = -h;
                break;
            }
        }
    }
    return h;
}

namespace {

bool finite(double x) { return std::isfinite(x); }

// All three angles of triangle (a, b, c) from the per-vertex tables.
struct TriangleAngles {
    double at_a, at_b, at_c;
    bool defined() const { return finite(at_a) && finite(at_b) && finite(at_c); }
    bool degenerate(double tol_angle) const {
        const double pi = M_PI;
        for (double th : {at_a, at_b, at_c})
            if (!(th > tol_angle && th < pi - tol_angle)) return true;
        return false;
    }
};

TriangleAngles triangle_angles(const std::vector<Matrix>& angles, int a, int b, int c) {
    return {angles[a](b, c), angles[b](a, c), angles[c](a, b)};
}

}  // namespace

Matrix ratios_from_angles(const std::vector<Matrix>& angles, const Tolerances& tol) {
    const int nt = static_cast<int>(angles.size());
    if (nt < 3) throw ShapeError("need at least three agents for the sine rule");

    // Lowest tuple index whose triangles with every other pair are sound.
    int pivot = -1;
    for (int p = 0; p < nt && pivot < 0; ++p) {
        bool ok = true;
        for (int x = 0; x < nt && ok; ++x) {
            if (x == p) continue;
            for (int y = x + 1; y < nt && ok; ++y) {
                if (y == p) continue;
                TriangleAngles tri = triangle_angles(angles, p, x, y);
                if (!tri.defined() || tri.degenerate(tol.angle)) ok = false;
            }
        }
        if (ok) pivot = p;
    }
    if (pivot < 0) throw NoPivot("no agent forms a sound triangle with every pair");

    const int a0 = pivot == 0 ? 1 : 0;  // reference edge (pivot, a0)
    Matrix R = Matrix::Zero(nt, nt);    // distances over d(pivot, a0)

    auto set = [&](int u, int v, double rho) { R(u, v) = R(v, u) = rho; };
    set(pivot, a0, 1.0);
    for (int x = 0; x < nt; ++x) {
        if (x == pivot || x == a0) continue;
        TriangleAngles tri = triangle_angles(angles, pivot, a0, x);
        if (tri.degenerate(tol.angle)) throw DegenerateTriangle(pivot, a0, x);
        set(pivot, x, std::sin(tri.at_b) / std::sin(tri.at_c));  // d_px / d_pa0
        set(a0, x, std::sin(tri.at_a) / std::sin(tri.at_c));     // d_a0x / d_pa0
    }
    for (int x = 0; x < nt; ++x) {
        if (x == pivot || x == a0) continue;
        for (int y = x + 1; y < nt; ++y) {
            if (y == pivot || y == a0) continue;
            TriangleAngles tri = triangle_angles(angles, pivot, x, y);
            if (tri.degenerate(tol.angle)) throw DegenerateTriangle(pivot, x, y);
            // d_xy / d_px, rescaled through the shared edge d_px.
            const double over_px = std::sin(tri.at_a) / std::sin(tri.at_c);
            set(x, y, over_px * R(pivot, x));
        }
    }
    return R.array().square().matrix();
}

DisplacementConstraint h_from_relative_positions(const MeasurementSnapshot& snapshot,
                                                 const Tolerances& tol) {
    if (snapshot.kind != MeasurementKind::RelativePosition)
        throw ValidationError("snapshot does not carry relative positions");
    // A common unknown rotation of the columns preserves the nullspace.
    Vector h = nullspace_coefficients(snapshot.relative_positions, tol);
    return make_constraint(snapshot, std::move(h), tol);
}

namespace {

DisplacementConstraint h_from_tuple_matrix(const MeasurementSnapshot& snapshot,
                                           const Matrix& M, int d, const Tolerances& tol) {
    MdsEmbedding embed = mds_embed(SquaredDistanceMatrix::from(M), d, tol);
    Matrix E(d, d + 1);
    for (int k = 0; k < d + 1; ++k)
        E.col(k) = embed.points.col(k + 1) - embed.points.col(0);
    Vector h = nullspace_coefficients(E, tol);
    return make_constraint(snapshot, std::move(h), tol);
}

}  // namespace

DisplacementConstraint h_from_distances(const MeasurementSnapshot& snapshot, int d,
                                        const Tolerances& tol) {
    if (snapshot.kind != MeasurementKind::Distance)
        throw ValidationError("snapshot does not carry distances");
    const int nt = d + 2;
    Matrix M = Matrix::Zero(nt, nt);
    for (int k = 0; k < d + 1; ++k) {
        const double sq = snapshot.own_distances(k) * snapshot.own_distances(k);
        M(0, k + 1) = M(k + 1, 0) = sq;
    }
    M.bottomRightCorner(d + 1, d + 1) = snapshot.neighbor_sq_distances;
    return h_from_tuple_matrix(snapshot, M, d, tol);
}

DisplacementConstraint h_from_ratios(const MeasurementSnapshot& snapshot, int d,
                                     const Tolerances& tol) {
    if (snapshot.kind != MeasurementKind::RatioOfDistance)
        throw ValidationError("snapshot does not carry ratio-of-distances");
    if (!snapshot.own_sq_ratios.allFinite() || !snapshot.neighbor_sq_ratios.allFinite())
        throw ZeroReferenceDistance("reference pair distance vanished");
    const int nt = d + 2;
    Matrix M = Matrix::Zero(nt, nt);
    for (int k = 0; k < d + 1; ++k)
        M(0, k + 1) = M(k + 1, 0) = snapshot.own_sq_ratios(k);
    M.bottomRightCorner(d + 1, d + 1) = snapshot.neighbor_sq_ratios;
    return h_from_tuple_matrix(snapshot, M, d, tol);
}

namespace {

// Shared back end of the angle and bearing solvers. `tables` holds one
// (d+2)x(d+2) angle table per tuple agent; undefined entries are NaN.
//
// The coincidence test (follower sitting on neighbor j) replaces the
// follower by j in every available angle. Comparing only the angles at the
// two vertices is not enough in the plane: by the inscribed-angle theorem a
// follower concyclic with j over a neighbor pair produces the same vertex
// angle without coinciding. Angles that see the follower as an endpoint from
// the other vertices break that ambiguity, so they are required to match too.
DisplacementConstraint h_from_angle_tables(const MeasurementSnapshot& snapshot,
                                           const std::vector<Matrix>& tables, int d,
                                           const Tolerances& tol) {
    const int nt = d + 2;
    bool undecidable = false;
    for (int j = 1; j < nt; ++j) {
        bool match = true, decided = true;
        auto compare = [&](double at_i, double at_j) {
            if (!finite(at_i) || !finite(at_j)) {
                decided = false;
                return;
            }
            if (std::abs(at_i - at_j) > tol.angle) match = false;
        };
        // Vertex substitution: angles over neighbor pairs seen from the
        // follower and from candidate j.
        for (int a = 1; a < nt && match; ++a) {
            if (a == j) continue;
            for (int b = a + 1; b < nt && match; ++b) {
                if (b == j) continue;
                compare(tables[0](a, b), tables[j](a, b));
            }
        }
        // Endpoint substitution: every other vertex must see the follower
        // and candidate j under the same angle against each third agent.
        for (int v = 1; v < nt && match; ++v) {
            if (v == j) continue;
            for (int u = 1; u < nt && match; ++u) {
                if (u == j || u == v) continue;
                compare(tables[v](0, u), tables[v](j, u));
            }
        }
        if (match && decided) {
            Vector h = Vector::Zero(d + 1);
            h(j - 1) = 1.0;
            return make_constraint(snapshot, std::move(h), tol);
        }
        if (match && !decided) undecidable = true;
    }
    if (undecidable)
        throw CaseUndetermined("angle data insufficient to rule the coincidence case in or out");
    Matrix R = ratios_from_angles(tables, tol);
    return h_from_tuple_matrix(snapshot, R, d, tol);
}

}  // namespace

DisplacementConstraint h_from_angles(const MeasurementSnapshot& snapshot, int d,
                                     const Tolerances& tol) {
    if (snapshot.kind != MeasurementKind::Angle)
        throw ValidationError("snapshot does not carry angles");
    return h_from_angle_tables(snapshot, snapshot.angles, d, tol);
}

DisplacementConstraint h_from_bearings(const MeasurementSnapshot& snapshot, int d,
                                       const Tolerances& tol) {
    if (snapshot.kind != MeasurementKind::Bearing)
        throw ValidationError("snapshot does not carry bearings");
    const int nt = d + 2;

    if (snapshot.frame == Frame::Global) {
        // Coincidence test directly on the shared-frame bearings.
        for (int j = 1; j < nt; ++j) {
            bool match = true;
            for (int k = 1; k < nt && match; ++k) {
                if (k == j) continue;
                const Vector gi = snapshot.bearings[0].col(k);
                const Vector gj = snapshot.bearings[j].col(k);
                if (!gi.allFinite() || !gj.allFinite()) {
                    match = false;
                    continue;
                }
                if ((gi - gj).lpNorm<Eigen::Infinity>() > tol.bearing) match = false;
            }
            if (match) {
                Vector h = Vector::Zero(d + 1);
                h(j - 1) = 1.0;
                return make_constraint(snapshot, std::move(h), tol);
            }
        }
    }

    // Angles from same-frame bearing pairs; each inner product lives in a
    // single agent's frame, so unknown per-agent rotations drop out.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<Matrix> tables(nt, Matrix::Constant(nt, nt, nan));
    for (int v = 0; v < nt; ++v) {
        for (int a = 0; a < nt; ++a) {
            if (a == v) continue;
            for (int b = 0; b < nt; ++b) {
                if (b == v || b == a) continue;
                const Vector ga = snapshot.bearings[v].col(a);
                const Vector gb = snapshot.bearings[v].col(b);
                if (!ga.allFinite() || !gb.allFinite()) continue;
                tables[v](a, b) = angles_from_bearings(ga, gb);
            }
            tables[v](a, a) = 0.0;
        }
    }
    return h_from_angle_tables(snapshot, tables, d, tol);
}

DisplacementConstraint solve_displacement(const MeasurementSnapshot& snapshot, int d,
                                          const Tolerances& tol) {
    switch (snapshot.kind) {
        case MeasurementKind::RelativePosition: return h_from_relative_positions(snapshot, tol);
        case MeasurementKind::Bearing: return h_from_bearings(snapshot, d, tol);
        case MeasurementKind::Distance: return h_from_distances(snapshot, d, tol);
        case MeasurementKind::Angle: return h_from_angles(snapshot, d, tol);
        case MeasurementKind::RatioOfDistance: return h_from_ratios(snapshot, d, tol);
    }
    throw ValidationError("unknown measurement kind");
}

}  // namespace formctl
