#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

using namespace formctl;
using namespace formctl::testing;

namespace {

Matrix squared_distance_matrix(const Matrix& points) {
    const int n = static_cast<int>(points.cols());
    Matrix M = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b) M(a, b) = (points.col(a) - points.col(b)).squaredNorm();
    return M;
}

MeasurementSnapshot tuple_snapshot(const Matrix& tuple, MeasurementKind kind, Frame frame,
                                   const std::map<AgentId, Matrix>& frames = {}) {
    const int d = static_cast<int>(tuple.rows());
    FormationGraph g = tuple_graph(d);
    Matrix pos = tuple_positions(tuple);
    auto est = exact_estimates(pos);
    return synthesize_snapshot(pos, est, g, g.n, {kind, frame}, frames);
}

Vector solver_h(const Matrix& tuple, MeasurementKind kind, Frame frame = Frame::Global,
                const std::map<AgentId, Matrix>& frames = {}) {
    MeasurementSnapshot snap = tuple_snapshot(tuple, kind, frame, frames);
    const int d = static_cast<int>(tuple.rows());
    return solve_displacement(snap, d).coefficients;
}

Matrix five_agent_follower4_tuple() {
    Matrix t(2, 4);  // (4; 1, 2, 3)
    t.col(0) = (Vector(2) << -4, 3).finished();
    t.col(1) = (Vector(2) << 2, 1).finished();
    t.col(2) = (Vector(2) << -1, 3).finished();
    t.col(3) = (Vector(2) << -1, -1).finished();
    return t;
}

Matrix five_agent_follower5_tuple() {
    Matrix t(2, 4);  // (5; 2, 3, 4)
    t.col(0) = (Vector(2) << -4, -1).finished();
    t.col(1) = (Vector(2) << -1, 3).finished();
    t.col(2) = (Vector(2) << -1, -1).finished();
    t.col(3) = (Vector(2) << -4, 3).finished();
    return t;
}

}  // namespace

TEST_CASE("classical scaling reproduces the unit square") {
    Matrix pts(2, 4);
    pts << 0, 1, 1, 0, 0, 0, 1, 1;
    MdsEmbedding embed = mds_embed(SquaredDistanceMatrix::from(squared_distance_matrix(pts)), 2);
    std::multiset<double> dists;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            dists.insert((embed.points.col(a) - embed.points.col(b)).norm());
    std::vector<double> expect{1, 1, 1, 1, std::sqrt(2.0), std::sqrt(2.0)};
    auto it = dists.begin();
    for (double e : expect) {
        CHECK(*it == doctest::Approx(e).epsilon(1e-9));
        ++it;
    }
}

TEST_CASE("classical scaling round-trips the five-agent target tuple") {
    Matrix tuple = five_agent_follower4_tuple();
    Matrix M = squared_distance_matrix(tuple);
    MdsEmbedding embed = mds_embed(SquaredDistanceMatrix::from(M), 2);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double got = (embed.points.col(a) - embed.points.col(b)).norm();
            CHECK(got == doctest::Approx(std::sqrt(M(a, b))).epsilon(1e-9));
        }
}

TEST_CASE("all-zero distance matrix embeds to coincident points") {
    MdsEmbedding embed = mds_embed(SquaredDistanceMatrix::from(Matrix::Zero(4, 4)), 2);
    CHECK(embed.points.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(embed.rank_deficient);
}

TEST_CASE("collinear tuples embed with the rank-deficiency flag") {
    Matrix pts(2, 4);
    pts << 0, 1, 2, 3, 0, 0, 0, 0;
    MdsEmbedding embed =
        mds_embed(SquaredDistanceMatrix::from(squared_distance_matrix(pts)), 2);
    CHECK(embed.rank_deficient);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double got = (embed.points.col(a) - embed.points.col(b)).norm();
            CHECK(got == doctest::Approx((pts.col(a) - pts.col(b)).norm()).epsilon(1e-9));
        }
}

TEST_CASE("inconsistent distance data is rejected") {
    // Violates the triangle inequality badly: three points pairwise 1 apart,
    // fourth point at distance 10 from one and 0.1 from the others.
    Matrix M(4, 4);
    M << 0, 1, 1, 100, 1, 0, 1, 0.01, 1, 1, 0, 0.01, 100, 0.01, 0.01, 0;
    CHECK_THROWS_AS(mds_embed(SquaredDistanceMatrix::from(M), 2), NotEmbeddable);
}

TEST_CASE("squared-distance matrix validation") {
    Matrix bad(3, 3);
    bad << 0, 1, 2, 1, 0, 3, 2, 3.5, 0;
    CHECK_THROWS_AS(SquaredDistanceMatrix::from(bad), ValidationError);
    bad << 0, 1, 2, 1, 0.5, 3, 2, 3, 0;
    CHECK_THROWS_AS(SquaredDistanceMatrix::from(bad), ValidationError);
    bad << 0, -1, 2, -1, 0, 3, 2, 3, 0;
    CHECK_THROWS_AS(SquaredDistanceMatrix::from(bad), ValidationError);
}

TEST_CASE("nullspace coefficients") {
    SUBCASE("columns that sum to zero") {
        Matrix E(2, 3);
        E << 1, 0, -1, 0, 1, -1;
        Vector h = nullspace_coefficients(E);
        Vector expect(3);
        expect << 1, 1, 1;
        CHECK((h - normalize_coefficients(expect)).norm() <= 1e-12);
    }
    SUBCASE("matches the cofactor oracle") {
        Matrix E(2, 3);
        E << 1, 0, 1, 0, 1, 1;
        CHECK((nullspace_coefficients(E) - oracle_nullspace(E)).norm() <= 1e-12);
    }
    SUBCASE("rank-1 input is ambiguous") {
        Matrix E(2, 3);
        E << 1, 1, 2, 0, 0, 0;
        CHECK_THROWS_AS(nullspace_coefficients(E), AmbiguousNullspace);
    }
}

TEST_CASE("relative-position solver") {
    SUBCASE("five-agent follower 4 matches the nominal weights") {
        Vector h = solver_h(five_agent_follower4_tuple(), MeasurementKind::RelativePosition);
        Vector expect(3);
        expect << -2, 3, 1;
        CHECK((h - normalize_coefficients(expect)).norm() <= 1e-10);
    }
    SUBCASE("rotating every relative position leaves h unchanged") {
        std::mt19937_64 rng(3);
        Matrix tuple = five_agent_follower4_tuple();
        Vector base = solver_h(tuple, MeasurementKind::RelativePosition);
        for (int trial = 0; trial < 10; ++trial) {
            Matrix frames_q = random_rotation(rng, 2);
            std::map<AgentId, Matrix> frames;
            for (AgentId i = 1; i <= 4; ++i) frames[i] = frames_q;
            Vector h = solver_h(tuple, MeasurementKind::RelativePosition, Frame::Local, frames);
            CHECK((h - base).lpNorm<Eigen::Infinity>() <= 1e-10);
        }
    }
    SUBCASE("centroid follower has equal coefficients") {
        Matrix tuple(2, 4);
        tuple.col(0) = Vector::Zero(2);  // centroid
        tuple.col(1) = (Vector(2) << 1, 0).finished();
        tuple.col(2) = (Vector(2) << -0.5, std::sqrt(3.0) / 2).finished();
        tuple.col(3) = (Vector(2) << -0.5, -std::sqrt(3.0) / 2).finished();
        Vector h = solver_h(tuple, MeasurementKind::RelativePosition);
        CHECK((h - oracle_tuple_h(tuple)).norm() <= 1e-10);
        CHECK(std::abs(h(0) - h(1)) <= 1e-10);
        CHECK(std::abs(h(0) - h(2)) <= 1e-10);
    }
}

TEST_CASE("distance solver") {
    SUBCASE("five-agent follower 5") {
        Vector h = solver_h(five_agent_follower5_tuple(), MeasurementKind::Distance);
        Vector expect(3);
        expect << -1, 1, 1;
        CHECK((h - normalize_coefficients(expect)).norm() <= 1e-8);
    }
    SUBCASE("unit-square corner matches the relative-position oracle") {
        Matrix tuple(2, 4);
        tuple << 0, 1, 1, 0, 0, 0, 1, 1;
        Vector h = solver_h(tuple, MeasurementKind::Distance);
        CHECK((h - oracle_tuple_h(tuple)).norm() <= 1e-8);
    }
    SUBCASE("scaling all distances by 3 leaves h unchanged") {
        Matrix tuple = five_agent_follower5_tuple();
        Vector base = solver_h(tuple, MeasurementKind::Distance);
        Vector scaled = solver_h((3.0 * tuple).eval(), MeasurementKind::Distance);
        CHECK((base - scaled).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("ratio solver") {
    SUBCASE("five-agent follower 4") {
        Vector h = solver_h(five_agent_follower4_tuple(), MeasurementKind::RatioOfDistance);
        Vector expect(3);
        expect << -2, 3, 1;
        CHECK((h - normalize_coefficients(expect)).norm() <= 1e-8);
    }
    SUBCASE("ratio and distance solvers agree") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 25; ++trial) {
            Matrix tuple = random_tuple(rng, 2);
            Vector a = solver_h(tuple, MeasurementKind::RatioOfDistance);
            Vector b = solver_h(tuple, MeasurementKind::Distance);
            CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-8);
        }
    }
    SUBCASE("equilateral triangle plus center gives equal neighbor coefficients") {
        Matrix tuple(2, 4);
        tuple.col(0) = Vector::Zero(2);
        tuple.col(1) = (Vector(2) << 1, 0).finished();
        tuple.col(2) = (Vector(2) << -0.5, std::sqrt(3.0) / 2).finished();
        tuple.col(3) = (Vector(2) << -0.5, -std::sqrt(3.0) / 2).finished();
        Vector h = solver_h(tuple, MeasurementKind::RatioOfDistance);
        CHECK((h - oracle_tuple_h(tuple)).norm() <= 1e-8);
    }
}

TEST_CASE("ratios from angles") {
    auto angle_tables = [](const Matrix& tuple) {
        return tuple_snapshot(tuple, MeasurementKind::Angle, Frame::Global).angles;
    };

    SUBCASE("equilateral triangle has unit side ratios") {
        // Three agents only: a 3x3 table set. Build by hand.
        const double pi3 = M_PI / 3;
        std::vector<Matrix> tables(3, Matrix::Constant(3, 3, 0.0));
        for (int v = 0; v < 3; ++v)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    if (a != v && b != v && a != b) tables[v](a, b) = pi3;
        Matrix R = ratios_from_angles(tables);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (a != b) CHECK(R(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("right isoceles triangle exposes the hypotenuse") {
        std::vector<Matrix> tables(3, Matrix::Constant(3, 3, 0.0));
        // Vertex 0 holds the right angle; 1 and 2 see pi/4.
        tables[0](1, 2) = tables[0](2, 1) = M_PI / 2;
        tables[1](0, 2) = tables[1](2, 0) = M_PI / 4;
        tables[2](0, 1) = tables[2](1, 0) = M_PI / 4;
        Matrix R = ratios_from_angles(tables);
        // Reference edge is (0, 1), a leg; the hypotenuse is (1, 2).
        CHECK(std::sqrt(R(1, 2)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(std::sqrt(R(0, 2)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("five-agent follower 4 tuple reproduces the true ratio matrix") {
        Matrix tuple = five_agent_follower4_tuple();
        Matrix R = ratios_from_angles(angle_tables(tuple));
        Matrix truth = squared_distance_matrix(tuple);
        // Normalize both by the same entry to compare.
        Matrix Rn = R / R(0, 1);
        Matrix Tn = truth / truth(0, 1);
        CHECK((Rn - Tn).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
    SUBCASE("no pivot when every agent is inside a degenerate set") {
        std::vector<Matrix> tables(3, Matrix::Constant(3, 3, 0.0));
        // All angles zero: collinear, no triangles anywhere.
        CHECK_THROWS_AS(ratios_from_angles(tables), NoPivot);
    }
}

TEST_CASE("angle solver") {
    SUBCASE("coincidence case returns the indicator of the matching neighbor") {
        // Follower coincides with neighbor 2 (tuple index 2): every angle at
        // the follower equals the angle at that neighbor; entries touching
        // the coincident pair stay undefined.
        const int d = 2;
        const int nt = d + 2;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::mt19937_64 rng(41);
        Matrix tuple = random_tuple(rng, d);
        tuple.col(0) = tuple.col(2);  // exact coincidence
        MeasurementSnapshot snap;
        snap.follower = nt;
        snap.kind = MeasurementKind::Angle;
        snap.neighbors = {1, 2, 3};
        snap.angles.assign(nt, Matrix::Constant(nt, nt, nan));
        for (int v = 0; v < nt; ++v)
            for (int a = 0; a < nt; ++a) {
                if (a == v) continue;
                for (int b = 0; b < nt; ++b) {
                    if (b == v || b == a) continue;
                    const Vector ga = tuple.col(a) - tuple.col(v);
                    const Vector gb = tuple.col(b) - tuple.col(v);
                    if (ga.norm() < 1e-12 || gb.norm() < 1e-12) continue;  // leave NaN
                    snap.angles[v](a, b) =
                        angles_from_bearings(ga.normalized(), gb.normalized());
                }
            }
        DisplacementConstraint c = h_from_angles(snap, d);
        Vector expect = Vector::Zero(3);
        expect(1) = 1.0;  // neighbor at tuple index 2
        CHECK((c.coefficients - expect).norm() <= 1e-12);
        CHECK(c.localizable);
    }
    SUBCASE("five-agent follower 4") {
        Vector h = solver_h(five_agent_follower4_tuple(), MeasurementKind::Angle);
        Vector expect(3);
        expect << -2, 3, 1;
        CHECK((h - normalize_coefficients(expect)).norm() <= 1e-8);
    }
    SUBCASE("similarity transforms leave the angle-based h unchanged") {
        std::mt19937_64 rng(43);
        std::uniform_real_distribution<double> scale(0.2, 4.0);
        Matrix tuple = five_agent_follower4_tuple();
        Vector base = solver_h(tuple, MeasurementKind::Angle);
        for (int trial = 0; trial < 10; ++trial) {
            Matrix Q = random_rotation(rng, 2);
            Matrix moved = scale(rng) * Q * tuple;
            moved.colwise() += (Vector(2) << trial, -trial).finished();
            CHECK((solver_h(moved, MeasurementKind::Angle) - base).lpNorm<Eigen::Infinity>() <=
                  1e-8);
        }
    }
}

TEST_CASE("bearing solver") {
    SUBCASE("five-agent follower 5") {
        Vector h = solver_h(five_agent_follower5_tuple(), MeasurementKind::Bearing);
        Vector expect(3);
        expect << -1, 1, 1;
        CHECK((h - normalize_coefficients(expect)).norm() <= 1e-8);
    }
    SUBCASE("per-agent local frames do not change h") {
        std::mt19937_64 rng(47);
        Matrix tuple = five_agent_follower5_tuple();
        Vector base = solver_h(tuple, MeasurementKind::Bearing);
        for (int trial = 0; trial < 10; ++trial) {
            std::map<AgentId, Matrix> frames;
            for (AgentId i = 1; i <= 4; ++i) frames[i] = random_rotation(rng, 2);
            Vector h = solver_h(tuple, MeasurementKind::Bearing, Frame::Local, frames);
            CHECK((h - base).lpNorm<Eigen::Infinity>() <= 1e-8);
        }
    }
    SUBCASE("translations leave bearings and h unchanged") {
        Matrix tuple = five_agent_follower5_tuple();
        Vector base = solver_h(tuple, MeasurementKind::Bearing);
        Matrix moved = tuple;
        moved.colwise() += (Vector(2) << 12.5, -3.25).finished();
        CHECK((solver_h(moved, MeasurementKind::Bearing) - base).lpNorm<Eigen::Infinity>() <=
              1e-10);
    }
    SUBCASE("global coincidence case returns the indicator") {
        const int d = 2;
        const int nt = d + 2;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::mt19937_64 rng(53);
        Matrix tuple = random_tuple(rng, d);
        tuple.col(0) = tuple.col(3);  // follower on neighbor at tuple index 3
        MeasurementSnapshot snap;
        snap.follower = nt;
        snap.kind = MeasurementKind::Bearing;
        snap.frame = Frame::Global;
        snap.neighbors = {1, 2, 3};
        snap.bearings.assign(nt, Matrix::Constant(d, nt, nan));
        for (int v = 0; v < nt; ++v)
            for (int u = 0; u < nt; ++u) {
                if (u == v) continue;
                const Vector e = tuple.col(u) - tuple.col(v);
                if (e.norm() < 1e-12) continue;
                snap.bearings[v].col(u) = e.normalized();
            }
        DisplacementConstraint c = h_from_bearings(snap, d);
        Vector expect = Vector::Zero(3);
        expect(2) = 1.0;
        CHECK((c.coefficients - expect).norm() <= 1e-12);
    }
}

TEST_CASE("cross-solver equivalence on random tuples") {
    std::mt19937_64 rng(59);
    for (int d : {2, 3}) {
        for (int trial = 0; trial < 50; ++trial) {
            Matrix tuple = random_tuple(rng, d);
            Vector truth = oracle_tuple_h(tuple);
            CHECK((solver_h(tuple, MeasurementKind::RelativePosition) - truth).norm() <= 1e-6);
            CHECK((solver_h(tuple, MeasurementKind::Distance) - truth).norm() <= 1e-6);
            CHECK((solver_h(tuple, MeasurementKind::RatioOfDistance) - truth).norm() <= 1e-6);
            CHECK((solver_h(tuple, MeasurementKind::Angle) - truth).norm() <= 1e-6);
            CHECK((solver_h(tuple, MeasurementKind::Bearing) - truth).norm() <= 1e-6);
        }
    }
}

TEST_CASE("barycentric recovery on localizable constraints") {
    std::mt19937_64 rng(61);
    int done = 0;
    while (done < 30) {
        Matrix tuple = random_tuple(rng, 2);
        MeasurementSnapshot snap = tuple_snapshot(tuple, MeasurementKind::Distance, Frame::Global);
        DisplacementConstraint c = h_from_distances(snap, 2);
        if (!c.localizable || std::abs(c.h_ii) < 0.05) continue;
        Vector mix = Vector::Zero(2);
        for (int k = 0; k < 3; ++k)
            mix += (c.coefficients(k) / c.h_ii) * tuple.col(k + 1);
        CHECK((tuple.col(0) - mix).norm() <= 1e-7);
        ++done;
    }
}

TEST_CASE("h_ii threshold agrees with the hyperplane test") {
    std::mt19937_64 rng(67);
    int checked = 0;
    while (checked < 40) {
        Matrix tuple = random_tuple(rng, 2);
        Vector h = oracle_tuple_h(tuple);
        const double h_ii = h.sum();
        if (std::abs(h_ii) < 0.05) continue;  // stay away from the threshold itself
        Matrix neighbors = tuple.rightCols(3);
        MeasurementSnapshot snap =
            tuple_snapshot(tuple, MeasurementKind::RelativePosition, Frame::Global);
        DisplacementConstraint c = h_from_relative_positions(snap);
        CHECK(c.localizable == check_general_position(neighbors));
        ++checked;
    }
}
