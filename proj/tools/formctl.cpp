// formctl: scenario validation, formation weight inspection, simulation
// driver and one-shot solver utilities with CSV output.

#include "formctl/control.hpp"
#include "formctl/displacement.hpp"
#include "formctl/log.hpp"
#include "formctl/scenario_io.hpp"
#include "formctl/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;
using namespace formctl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void print_matrix(std::ostream& os, const std::string& name, const Matrix& M) {
    os << name << " (" << M.rows() << "x" << M.cols() << ")\n";
    for (int r = 0; r < M.rows(); ++r) {
        for (int c = 0; c < M.cols(); ++c) os << (c ? " " : "  ") << fmt(M(r, c));
        os << "\n";
    }
}

void write_matrix_csv(const fs::path& path, const Matrix& M) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (int r = 0; r < M.rows(); ++r) {
        for (int c = 0; c < M.cols(); ++c) out << (c ? "," : "") << fmt(M(r, c));
        out << "\n";
    }
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) throw IoError("empty matrix file: " + path);
    Matrix M(rows.size(), rows[0].size());
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw IoError("ragged rows in matrix file: " + path);
        for (size_t c = 0; c < rows[r].size(); ++c) M(r, c) = rows[r][c];
    }
    return M;
}

int cmd_validate(const std::string& scenario_path) {
    // parse_scenario runs every graph/formation validation; reaching the end
    // means the scenario is sound.
    try {
        ScenarioConfig sc = parse_scenario(scenario_path);
        const FormationGraph& g = sc.nominal.graph;
        std::cout << "scenario: " << sc.name << "\n";
        std::cout << "agents: " << g.n << " (" << g.m << " leaders, " << g.n - g.m
                  << " followers), d = " << g.d << "\n";
        std::cout << "layers:";
        int kappa = 0;
        for (const auto& [agent, layer] : sc.nominal.graph.layers) kappa = std::max(kappa, layer);
        for (int layer = 1; layer <= kappa; ++layer) {
            std::cout << " " << layer << ":{";
            bool first = true;
            for (const auto& [agent, lg] : sc.nominal.graph.layers)
                if (lg == layer) {
                    std::cout << (first ? "" : ",") << agent;
                    first = false;
                }
            std::cout << "}";
        }
        std::cout << "\n";
        for (AgentId i = g.m + 1; i <= g.n; ++i)
            std::cout << "follower " << i << ": " << disjoint_path_count(g, i)
                      << " disjoint paths from the leader set\n";
        std::cout << "localizable: " << (check_localizability(sc.nominal.omega_ff, sc.tol)
                                             ? "yes"
                                             : "no")
                  << "\n";
        std::cout << "graph: valid\n";
        return kExitOk;
    } catch (const ValidationError& e) {
        std::cout << e.what() << "\n";
        return kExitValidation;
    }
}

int cmd_weights(const std::string& scenario_path, const std::string& out_dir) {
    ScenarioConfig sc = parse_scenario(scenario_path);
    const FormationGraph& g = sc.nominal.graph;
    for (AgentId i = g.m + 1; i <= g.n; ++i) {
        const FollowerWeights& w = sc.nominal.weights.at(i);
        std::cout << "follower " << i << ": neighbors";
        for (AgentId j : w.neighbors) std::cout << " " << j;
        std::cout << ", weights";
        for (int k = 0; k < w.w.size(); ++k) std::cout << " " << fmt(w.w(k));
        std::cout << ", w_ii " << fmt(w.w_ii) << "\n";
    }
    print_matrix(std::cout, "omega_fl", sc.nominal.omega_fl);
    print_matrix(std::cout, "omega_ff", sc.nominal.omega_ff);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_matrix_csv(fs::path(out_dir) / "omega_fl.csv", sc.nominal.omega_fl);
        write_matrix_csv(fs::path(out_dir) / "omega_ff.csv", sc.nominal.omega_ff);
        Matrix W(g.n - g.m, g.d + 2);
        for (AgentId i = g.m + 1; i <= g.n; ++i) {
            const FollowerWeights& w = sc.nominal.weights.at(i);
            W(i - g.m - 1, 0) = i;
            for (int k = 0; k < w.w.size(); ++k) W(i - g.m - 1, 1 + k) = w.w(k);
            W(i - g.m - 1, g.d + 1) = w.w_ii;
        }
        write_matrix_csv(fs::path(out_dir) / "weights.csv", W);
        log_info("wrote omega_fl.csv, omega_ff.csv, weights.csv to " + out_dir);
    }
    return kExitOk;
}

std::string simulate_one(ScenarioConfig sc, double dt_override, double t_end_override,
                         int continuity_override, const std::string& out_dir) {
    if (dt_override > 0.0) sc.dt = dt_override;
    if (t_end_override > 0.0) sc.t_end = t_end_override;
    if (continuity_override >= 0) sc.gains.continuity_mode = continuity_override > 0;

    log_info("simulating '" + sc.name + "' (dt = " + fmt(sc.dt) + ", t_end = " +
             fmt(sc.t_end) + ")");
    TrajectoryLog log = run_scenario(sc);
    write_trajectory(log, out_dir, sc.eps);

    std::ostringstream report;
    Metrics metrics = error_metrics(log, sc.eps);
    for (const auto& [agent, am] : metrics.agents) {
        report << "agent " << agent << ": arrival "
               << (am.arrival_time < 0 ? std::string("never") : fmt(am.arrival_time))
               << ", settle " << fmt(am.settle_time) << ", peak track "
               << fmt(am.peak_track) << "\n";
    }
    report << "wrote " << (fs::path(out_dir) / "trajectory.csv").string() << "\n";
    return report.str();
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 double dt_override, double t_end_override, int continuity_override) {
    if (fs::is_directory(scenario_path)) {
        // Fan out over every scenario file in the directory; reports are
        // buffered per job so parallel runs do not interleave.
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(scenario_path))
            if (entry.path().extension() == ".scn") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("no .scn files in " + scenario_path);
        std::vector<std::future<std::string>> jobs;
        for (const fs::path& f : files) {
            ScenarioConfig sc = parse_scenario(f.string());
            std::string sub = (fs::path(out_dir) / f.stem()).string();
            jobs.push_back(std::async(std::launch::async, simulate_one, std::move(sc),
                                      dt_override, t_end_override, continuity_override, sub));
        }
        for (size_t k = 0; k < jobs.size(); ++k) {
            std::cout << "== " << files[k].stem().string() << "\n";
            std::cout << jobs[k].get();
        }
        return kExitOk;
    }
    std::cout << simulate_one(parse_scenario(scenario_path), dt_override, t_end_override,
                              continuity_override, out_dir);
    return kExitOk;
}

// Measurement tables for solve-h: a `tuple` row naming the follower and its
// neighbors, then typed rows:
//   relpos,<j>,<e...>            bearing,<v>,<u>,<g...>
//   dist,<a>,<b>,<value>         ratio,<a>,<b>,<value>
//   angle,<v>,<a>,<b>,<theta>
int cmd_solve_h(const std::string& kind_str, const std::string& input, bool local, int dim) {
    MeasurementKind kind = measurement_kind_from_string(kind_str);

    std::ifstream in(input);
    if (!in) throw IoError("cannot open: " + input);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!cells.empty()) rows.push_back(cells);
    }
    if (rows.empty() || rows[0][0] != "tuple" || rows[0].size() < 4)
        throw IoError("first data row must be 'tuple,<i>,<j0>,...'");

    std::vector<AgentId> tuple;
    for (size_t k = 1; k < rows[0].size(); ++k) tuple.push_back(std::stoi(rows[0][k]));
    const int nt = static_cast<int>(tuple.size());
    const int d = dim > 0 ? dim : nt - 2;
    if (nt != d + 2)
        throw ValidationError("tuple must name the follower and d+1 neighbors");
    auto tuple_index = [&](AgentId id) {
        for (int k = 0; k < nt; ++k)
            if (tuple[k] == id) return k;
        throw ValidationError("agent " + std::to_string(id) + " is not in the tuple");
    };

    MeasurementSnapshot snap;
    snap.follower = tuple[0];
    snap.kind = kind;
    snap.frame = local ? Frame::Local : Frame::Global;
    snap.neighbors.assign(tuple.begin() + 1, tuple.end());

    const double nan = std::numeric_limits<double>::quiet_NaN();
    Matrix dist = Matrix::Constant(nt, nt, nan);
    snap.relative_positions = Matrix::Constant(d, d + 1, nan);
    snap.bearings.assign(nt, Matrix::Constant(d, nt, nan));
    snap.angles.assign(nt, Matrix::Constant(nt, nt, nan));

    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string& tag = row[0];
        if (tag == "relpos" && row.size() == 2 + static_cast<size_t>(d)) {
            const int j = tuple_index(std::stoi(row[1]));
            if (j < 1) throw ValidationError("relpos rows name a neighbor, not the follower");
            for (int k = 0; k < d; ++k)
                snap.relative_positions(k, j - 1) = std::stod(row[2 + k]);
        } else if (tag == "bearing" && row.size() == 3 + static_cast<size_t>(d)) {
            const int v = tuple_index(std::stoi(row[1]));
            const int u = tuple_index(std::stoi(row[2]));
            for (int k = 0; k < d; ++k) snap.bearings[v](k, u) = std::stod(row[3 + k]);
        } else if ((tag == "dist" || tag == "ratio") && row.size() == 4) {
            const int a = tuple_index(std::stoi(row[1]));
            const int b = tuple_index(std::stoi(row[2]));
            dist(a, b) = dist(b, a) = std::stod(row[3]);
        } else if (tag == "angle" && row.size() == 5) {
            const int v = tuple_index(std::stoi(row[1]));
            const int a = tuple_index(std::stoi(row[2]));
            const int b = tuple_index(std::stoi(row[3]));
            snap.angles[v](a, b) = snap.angles[v](b, a) = std::stod(row[4]);
        } else {
            throw IoError("malformed row '" + tag + "' in " + input);
        }
    }

    if (kind == MeasurementKind::Distance || kind == MeasurementKind::RatioOfDistance) {
        for (int a = 0; a < nt; ++a)
            for (int b = 0; b < nt; ++b)
                if (a != b && !std::isfinite(dist(a, b)))
                    throw ValidationError("missing pair distance in the table");
        if (kind == MeasurementKind::Distance) {
            snap.own_distances.resize(d + 1);
            for (int k = 0; k < d + 1; ++k) snap.own_distances(k) = dist(0, k + 1);
            snap.neighbor_sq_distances =
                dist.bottomRightCorner(d + 1, d + 1).array().square().matrix();
            snap.neighbor_sq_distances.diagonal().setZero();
        } else {
            snap.own_sq_ratios.resize(d + 1);
            for (int k = 0; k < d + 1; ++k)
                snap.own_sq_ratios(k) = dist(0, k + 1) * dist(0, k + 1);
            snap.neighbor_sq_ratios =
                dist.bottomRightCorner(d + 1, d + 1).array().square().matrix();
            snap.neighbor_sq_ratios.diagonal().setZero();
        }
    }

    DisplacementConstraint h = solve_displacement(snap, d, Tolerances{});
    std::cout << "follower " << h.follower << "\n";
    for (size_t k = 0; k < h.neighbors.size(); ++k)
        std::cout << "h[" << h.neighbors[k] << "] = " << fmt(h.coefficients(k)) << "\n";
    std::cout << "h_ii = " << fmt(h.h_ii) << "\n";
    std::cout << "localizable: " << (h.localizable ? "yes" : "no") << "\n";
    return kExitOk;
}

int cmd_mds(const std::string& input, int dim, const std::string& out_file) {
    Matrix M = read_matrix_csv(input);
    const int d = dim > 0 ? dim : static_cast<int>(M.rows()) - 2;
    MdsEmbedding embed = mds_embed(SquaredDistanceMatrix::from(M), d, Tolerances{});
    Matrix points = embed.points.transpose();  // one point per row
    if (embed.rank_deficient)
        std::cerr << "warning: configuration lies in a lower-dimensional flat\n";
    if (!out_file.empty()) {
        write_matrix_csv(out_file, points);
        std::cout << "wrote " << out_file << "\n";
    } else {
        for (int r = 0; r < points.rows(); ++r) {
            for (int c = 0; c < points.cols(); ++c)
                std::cout << (c ? "," : "") << fmt(points(r, c));
            std::cout << "\n";
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"formctl: distributed network localization and formation maneuver control"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, input_file, kind_str, out_file;
    double dt_override = -1.0, t_end_override = -1.0;
    std::string continuity_str;
    bool local = false;
    int dim = -1;

    CLI::App* validate = app.add_subcommand("validate", "check a scenario's graph and localizability");
    validate->add_option("scenario", scenario_path, "scenario file")->required();

    CLI::App* weights = app.add_subcommand("weights", "print nominal weights and follower matrices");
    weights->add_option("scenario", scenario_path, "scenario file")->required();
    weights->add_option("--out", out_dir, "also write CSV files here");

    CLI::App* simulate = app.add_subcommand("simulate", "run a scenario (or every .scn in a directory)");
    simulate->add_option("scenario", scenario_path, "scenario file or directory")->required();
    simulate->add_option("--out", out_dir, "output directory")->required();
    simulate->add_option("--dt", dt_override, "override step size");
    simulate->add_option("--t-end", t_end_override, "override horizon");
    simulate->add_option("--continuity", continuity_str, "override continuity mode (on|off)");

    CLI::App* solveh = app.add_subcommand("solve-h", "one-shot displacement solve from a measurement table");
    solveh->add_option("--kind", kind_str, "measurement kind")->required();
    solveh->add_option("--input", input_file, "measurement table CSV")->required();
    solveh->add_flag("--local", local, "measurements are in local frames");
    solveh->add_option("--dim", dim, "ambient dimension");

    CLI::App* mds = app.add_subcommand("mds", "embed a squared-distance matrix");
    mds->add_option("--input", input_file, "squared-distance matrix CSV")->required();
    mds->add_option("--dim", dim, "embedding dimension");
    mds->add_option("--out", out_file, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    int continuity_override = -1;
    if (!continuity_str.empty()) {
        if (continuity_str == "on") continuity_override = 1;
        else if (continuity_str == "off") continuity_override = 0;
        else {
            std::cerr << "--continuity takes 'on' or 'off'\n";
            return kExitUsage;
        }
    }

    try {
        if (validate->parsed()) return cmd_validate(scenario_path);
        if (weights->parsed()) return cmd_weights(scenario_path, out_dir);
        if (simulate->parsed())
            return cmd_simulate(scenario_path, out_dir, dt_override, t_end_override,
                                continuity_override);
        if (solveh->parsed()) return cmd_solve_h(kind_str, input_file, local, dim);
        if (mds->parsed()) return cmd_mds(input_file, dim, out_file);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const UnassignableFollowers& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
