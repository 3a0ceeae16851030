#include "formctl/formation.hpp"

#include "formctl/displacement.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace formctl {

bool check_general_position(const Matrix& points, const Tolerances& tol) {
    const int d = static_cast<int>(points.rows());
    const int k = static_cast<int>(points.cols());
    if (d < 1) throw DimensionMismatch("points must live in R^d with d >= 1");
    if (k < d + 1)
        throw DimensionMismatch("need at least d+1 points for a hyperplane test");

    Matrix diffs = points.rightCols(k - 1).colwise() - points.col(0);
    Eigen::JacobiSVD<Matrix> svd(diffs);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0) return false;
    return sv(sv.size() - 1) > tol.rank * sv(0);
}

WeightMap compute_nominal_weights(const Matrix& r, const FormationGraph& graph,
                                  const Tolerances& tol) {
    const int d = graph.d;
    if (r.rows() != graph.n || r.cols() != d)
        throw DimensionMismatch("nominal configuration must be n x d");

    WeightMap weights;
    for (AgentId i = graph.m + 1; i <= graph.n; ++i) {
        const auto& declared = graph.neighbors(i);
        if (static_cast<int>(declared.size()) < d + 1)
            throw ValidationError("follower " + std::to_string(i) +
                                  " has fewer than d+1 designated neighbors");
        // Only the designated d+1 feed the constraint; extras are ignored.
        std::vector<AgentId> nbrs(declared.begin(), declared.begin() + d + 1);

        Matrix E(d, d + 1);
        for (int k = 0; k <= d; ++k)
            E.col(k) = (r.row(nbrs[k] - 1) - r.row(i - 1)).transpose();

        Vector w;
        try {
            w = nullspace_coefficients(E, tol);
        } catch (const AmbiguousNullspace&) {
            throw DegenerateNeighborhood(i);
        }
        const double w_ii = w.sum();
        if (std::abs(w_ii) <= tol.wii) throw NotLocalizable(i);
        weights[i] = FollowerWeights{nbrs, w, w_ii};
    }
    return weights;
}

std::pair<Matrix, Matrix> assemble_follower_matrices(const WeightMap& weights,
                                                     const FormationGraph& graph) {
    const int nf = graph.follower_count();
    Matrix omega_fl = Matrix::Zero(nf, graph.m);
    Matrix omega_ff = Matrix::Zero(nf, nf);
    for (const auto& [i, fw] : weights) {
        const int row = i - graph.m - 1;
        for (size_t k = 0; k < fw.neighbors.size(); ++k) {
            const AgentId j = fw.neighbors[k];
            if (j <= graph.m)
                omega_fl(row, j - 1) = -fw.w(k);
            else
                omega_ff(row, j - graph.m - 1) = -fw.w(k);
        }
        omega_ff(row, row) = fw.w_ii;
    }
    return {omega_fl, omega_ff};
}

bool check_localizability(const Matrix& omega_ff, const Tolerances& tol) {
    if (omega_ff.rows() != omega_ff.cols())
        throw ShapeError("follower-follower block must be square");
    for (int k = 0; k < omega_ff.rows(); ++k)
        if (std::abs(omega_ff(k, k)) <= tol.wii) return false;
    return true;
}

Matrix solve_nominal_followers(const Matrix& omega_fl, const Matrix& omega_ff,
                               const Matrix& r_l, const Tolerances& tol) {
    if (!check_localizability(omega_ff, tol))
        throw Singular("follower-follower block has a near-zero diagonal entry");
    if (omega_fl.rows() != omega_ff.rows() || omega_fl.cols() != r_l.rows())
        throw ShapeError("follower matrix blocks do not match the leader configuration");
    Matrix rhs = -(omega_fl * r_l);
    return omega_ff.triangularView<Eigen::Lower>().solve(rhs);
}

NominalFormation make_nominal_formation(const FormationGraph& graph, const Matrix& r,
                                        const Tolerances& tol) {
    ValidationReport report = validate_graph(graph);
    if (!report.valid()) throw ValidationError(report.to_string());

    NominalFormation nf;
    nf.graph = graph;
    nf.graph.layers = report.layers;
    nf.r = r;
    nf.weights = compute_nominal_weights(r, graph, tol);
    std::tie(nf.omega_fl, nf.omega_ff) = assemble_follower_matrices(nf.weights, graph);

    // Row sums vanish by construction; trust but verify.
    Vector row_sums = nf.omega_fl.rowwise().sum() + nf.omega_ff.rowwise().sum();
    if (row_sums.lpNorm<Eigen::Infinity>() > 1e-12)
        throw Error("follower matrix row sums do not vanish");
    for (const auto& [i, fw] : nf.weights) {
        Vector residual = Vector::Zero(graph.d);
        for (size_t k = 0; k < fw.neighbors.size(); ++k)
            residual += fw.w(k) * (r.row(fw.neighbors[k] - 1) - r.row(i - 1)).transpose();
        if (residual.norm() > 1e-10)
            throw Error("nominal constraint residual too large for follower " + std::to_string(i));
    }
    if (!check_localizability(nf.omega_ff, tol))
        throw Singular("nominal formation is not localizable");
    return nf;
}

// --- maneuver schedule ------------------------------------------------------

namespace {

std::pair<double, double> eval_scalar(const ScalarSpec& s, double t0, double t1, double t) {
    switch (s.kind) {
        case ScalarSpec::Kind::Constant:
            return {s.value, 0.0};
        case ScalarSpec::Kind::Linear: {
            const double slope = (s.to - s.from) / (t1 - t0);
            return {s.from + slope * (t - t0), slope};
        }
        case ScalarSpec::Kind::Sinusoid: {
            const double arg = s.omega * (t - t0) + s.phase;
            return {s.offset + s.amplitude * std::sin(arg),
                    s.amplitude * s.omega * std::cos(arg)};
        }
    }
    return {0.0, 0.0};
}

std::pair<Vector, Vector> eval_vector(const VectorSpec& s, int d, double t0, double t1,
                                      double t) {
    switch (s.kind) {
        case VectorSpec::Kind::Constant:
            return {s.value, Vector::Zero(d)};
        case VectorSpec::Kind::Linear: {
            Vector slope = (s.to - s.from) / (t1 - t0);
            return {s.from + slope * (t - t0), slope};
        }
        case VectorSpec::Kind::Sinusoid: {
            const double arg = s.omega * (t - t0) + s.phase;
            return {s.offset + s.amplitude * std::sin(arg),
                    s.amplitude * s.omega * std::cos(arg)};
        }
    }
    return {Vector::Zero(d), Vector::Zero(d)};
}

std::pair<Matrix, Matrix> eval_rotation(const RotationSpec& s, int d, double t0, double t) {
    const double theta = s.angle0 + s.rate * (t - t0);
    const double c = std::cos(theta), sn = std::sin(theta);
    Matrix Q = Matrix::Identity(d, d);
    Matrix dQ = Matrix::Zero(d, d);
    const int a = s.axis_a, b = s.axis_b;
    Q(a, a) = c;
    Q(a, b) = -sn;
    Q(b, a) = sn;
    Q(b, b) = c;
    dQ(a, a) = -sn * s.rate;
    dQ(a, b) = -c * s.rate;
    dQ(b, a) = c * s.rate;
    dQ(b, b) = -sn * s.rate;
    return {Q, dQ};
}

ManeuverState eval_piece(const SchedulePiece& piece, int d, double t) {
    ManeuverState st;
    std::tie(st.beta, st.dbeta) = eval_scalar(piece.beta, piece.t_start, piece.t_end, t);
    std::tie(st.Q, st.dQ) = eval_rotation(piece.rot, d, piece.t_start, t);
    std::tie(st.delta, st.ddelta) = eval_vector(piece.delta, d, piece.t_start, piece.t_end, t);
    return st;
}

}  // namespace

void validate_schedule(const ManeuverSchedule& schedule, int d) {
    if (schedule.pieces.empty()) throw ValidationError("schedule has no pieces");
    const auto& pieces = schedule.pieces;
    if (std::abs(pieces.front().t_start) > 1e-12)
        throw ValidationError("schedule must start at t = 0");
    for (size_t k = 0; k < pieces.size(); ++k) {
        const auto& p = pieces[k];
        if (!(p.t_end > p.t_start))
            throw ValidationError("schedule piece " + std::to_string(k) + " has no extent");
        if (p.rot.axis_a == p.rot.axis_b || p.rot.axis_a < 0 || p.rot.axis_b < 0 ||
            p.rot.axis_a >= d || p.rot.axis_b >= d)
            throw ValidationError("rotation plane axes out of range in piece " +
                                  std::to_string(k));
        if (k + 1 < pieces.size() &&
            std::abs(pieces[k + 1].t_start - p.t_end) > 1e-12)
            throw ValidationError("schedule pieces do not tile the horizon at piece " +
                                  std::to_string(k));
    }
    // Positivity / properness at sampled times, continuity at boundaries.
    for (size_t k = 0; k < pieces.size(); ++k) {
        const auto& p = pieces[k];
        for (int s = 0; s <= 8; ++s) {
            const double t = p.t_start + (p.t_end - p.t_start) * s / 8.0;
            ManeuverState st = eval_piece(p, d, t);
            if (!(st.beta > 0.0))
                throw ValidationError("scale parameter is not positive at t = " +
                                      std::to_string(t));
            Matrix err = st.Q.transpose() * st.Q - Matrix::Identity(d, d);
            if (err.lpNorm<Eigen::Infinity>() > 1e-10 ||
                std::abs(st.Q.determinant() - 1.0) > 1e-10)
                throw ValidationError("rotation parameter is not proper at t = " +
                                      std::to_string(t));
        }
        if (k + 1 < pieces.size()) {
            ManeuverState left = eval_piece(p, d, p.t_end);
            ManeuverState right = eval_piece(pieces[k + 1], d, pieces[k + 1].t_start);
            const double mismatch =
                std::abs(left.beta - right.beta) +
                (left.Q - right.Q).lpNorm<Eigen::Infinity>() +
                (left.delta - right.delta).lpNorm<Eigen::Infinity>();
            if (mismatch > 1e-9)
                throw ValidationError("maneuver parameters jump across boundary t = " +
                                      std::to_string(p.t_end));
        }
    }
}

ManeuverState evaluate_maneuver(const ManeuverSchedule& schedule, int d, double t) {
    const auto& pieces = schedule.pieces;
    if (pieces.empty()) throw OutOfSchedule("schedule is empty");
    const double slack = 1e-12 * std::max(1.0, std::abs(schedule.t_end()));
    if (t < pieces.front().t_start - slack || t > schedule.t_end() + slack)
        throw OutOfSchedule("t = " + std::to_string(t) + " outside the schedule");

    // Right-derivative convention: the last piece starting at or before t
    // supplies both the value and the derivative.
    size_t idx = 0;
    for (size_t k = 0; k < pieces.size(); ++k)
        if (pieces[k].t_start <= t) idx = k;
    return eval_piece(pieces[idx], d, t);
}

TargetState target_configuration(const NominalFormation& nominal,
                                 const ManeuverSchedule& schedule, double t) {
    const int d = nominal.graph.d;
    const int n = nominal.graph.n;
    const int m = nominal.graph.m;
    ManeuverState st = evaluate_maneuver(schedule, d, t);

    TargetState out;
    out.p = st.beta * nominal.r * st.Q.transpose();
    out.p.rowwise() += st.delta.transpose();
    out.v = nominal.r * (st.dbeta * st.Q + st.beta * st.dQ).transpose();
    out.v.rowwise() += st.ddelta.transpose();

    // The follower block must be reproducible from the leader block alone.
    Matrix from_leaders =
        solve_nominal_followers(nominal.omega_fl, nominal.omega_ff, out.p.topRows(m));
    if ((out.p.bottomRows(n - m) - from_leaders).lpNorm<Eigen::Infinity>() > 1e-9)
        throw Error("target formation is inconsistent with the follower matrices");
    return out;
}

}  // namespace formctl
