#include "formctl/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace formctl {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    return tokens;
}

struct Cursor {
    std::string section = "";
    int line = 0;
};

[[noreturn]] void fail(const Cursor& at, const std::string& reason) {
    throw ParseError(at.section, at.line, reason);
}

double parse_num(const Cursor& at, const std::string& tok) {
    try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) fail(at, "trailing characters in number '" + tok + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (...) {
        fail(at, "expected a number, got '" + tok + "'");
    }
}

int parse_int(const Cursor& at, const std::string& tok) {
    const double v = parse_num(at, tok);
    const int i = static_cast<int>(std::lround(v));
    if (std::abs(v - i) > 0) fail(at, "expected an integer, got '" + tok + "'");
    return i;
}

// "<id>:" prefix of nominal / init / est rows.
int parse_id_colon(const Cursor& at, std::string tok) {
    if (tok.empty() || tok.back() != ':') fail(at, "expected '<id>:' prefix");
    tok.pop_back();
    return parse_int(at, tok);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string trajectory_header(int d) {
    auto axis = [](int k) {
        if (k < 3) return std::string(1, "xyz"[k]);
        return std::to_string(k + 1);
    };
    std::string h = "t,agent";
    for (int k = 0; k < d; ++k) h += ",p" + axis(k);
    for (int k = 0; k < d; ++k) h += ",ph" + axis(k);
    h += ",mode,err_track,err_est,err_bar";
    for (int k = 0; k < d; ++k) h += ",u" + axis(k);
    return h;
}

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& name) {
    std::istringstream in(text);

    int d = -1, n = -1, m = -1;
    std::map<int, std::vector<double>> nominal_rows;
    std::set<std::pair<AgentId, AgentId>> edges;
    std::map<AgentId, std::vector<AgentId>> neighbor_sets;
    std::map<AgentId, int> layers;
    std::map<AgentId, MeasurementModel> models;
    std::map<AgentId, std::vector<double>> frames_raw;
    ControlGains gains;
    Tolerances tol;
    std::vector<SchedulePiece> pieces;
    bool in_piece = false;
    double dt = 1e-3, t_end = -1.0, eps = 1e-3;
    int log_stride = 1;
    std::uint64_t seed = 0;
    std::map<int, std::vector<double>> init_rows, est_rows;

    Cursor at;
    std::string raw;
    auto need_dim = [&](const char* what) {
        if (d < 1) fail(at, std::string("[meta] with d must precede ") + what);
    };

    while (std::getline(in, raw)) {
        ++at.line;
        const size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::vector<std::string> tok = tokenize(raw);
        if (tok.empty()) continue;

        if (tok[0].front() == '[') {
            if (tok.size() != 1 || tok[0].back() != ']') fail(at, "malformed section header");
            at.section = tok[0].substr(1, tok[0].size() - 2);
            in_piece = false;
            continue;
        }

        if (at.section == "meta") {
            if (tok.size() != 3 || tok[1] != "=") fail(at, "expected 'key = value'");
            if (tok[0] == "d") d = parse_int(at, tok[2]);
            else if (tok[0] == "n") n = parse_int(at, tok[2]);
            else if (tok[0] == "m") m = parse_int(at, tok[2]);
            else fail(at, "unknown meta key '" + tok[0] + "'");
        } else if (at.section == "nominal") {
            need_dim("[nominal]");
            if (static_cast<int>(tok.size()) != 1 + d)
                fail(at, "expected '<id>: " + std::to_string(d) + " coordinates'");
            const int id = parse_id_colon(at, tok[0]);
            std::vector<double> row;
            for (int k = 0; k < d; ++k) row.push_back(parse_num(at, tok[1 + k]));
            nominal_rows[id] = row;
        } else if (at.section == "graph") {
            if (tok[0] == "edge") {
                if (tok.size() != 3) fail(at, "expected 'edge i j'");
                edges.insert({parse_int(at, tok[1]), parse_int(at, tok[2])});
            } else if (tok[0] == "neighbors") {
                if (tok.size() < 3) fail(at, "expected 'neighbors <id>: j0 j1 ...'");
                const int id = parse_id_colon(at, tok[1]);
                std::vector<AgentId> nbrs;
                for (size_t k = 2; k < tok.size(); ++k) nbrs.push_back(parse_int(at, tok[k]));
                neighbor_sets[id] = nbrs;
            } else if (tok[0] == "layer") {
                if (tok.size() != 3) fail(at, "expected 'layer <id> <g>'");
                layers[parse_int(at, tok[1])] = parse_int(at, tok[2]);
            } else {
                fail(at, "unknown graph directive '" + tok[0] + "'");
            }
        } else if (at.section == "followers") {
            need_dim("[followers]");
            if (tok[0] == "frame") {
                if (static_cast<int>(tok.size()) != 2 + d * d)
                    fail(at, "expected 'frame <id>: " + std::to_string(d * d) +
                                 " row-major entries'");
                const int id = parse_id_colon(at, tok[1]);
                std::vector<double> q;
                for (int k = 0; k < d * d; ++k) q.push_back(parse_num(at, tok[2 + k]));
                frames_raw[id] = q;
            } else {
                if (tok.size() < 2 || tok.size() > 3)
                    fail(at, "expected '<id>: <kind> [global|local]'");
                const int id = parse_id_colon(at, tok[0]);
                if (models.count(id)) fail(at, "duplicate measurement kind for follower " +
                                                   std::to_string(id));
                MeasurementModel model;
                model.kind = measurement_kind_from_string(tok[1]);
                if (tok.size() == 3) {
                    if (tok[2] == "local") model.frame = Frame::Local;
                    else if (tok[2] == "global") model.frame = Frame::Global;
                    else fail(at, "frame must be 'global' or 'local'");
                }
                try {
                    validate_model(model);
                } catch (const ValidationError& e) {
                    fail(at, e.what());
                }
                models[id] = model;
            }
        } else if (at.section == "gains") {
            if (tok.size() != 3 || tok[1] != "=") fail(at, "expected 'key = value'");
            if (tok[0] == "a1") gains.a1 = parse_num(at, tok[2]);
            else if (tok[0] == "a2") gains.a2 = parse_num(at, tok[2]);
            else if (tok[0] == "a3") gains.a3 = parse_num(at, tok[2]);
            else if (tok[0] == "a4") gains.a4 = parse_num(at, tok[2]);
            else if (tok[0] == "continuity") gains.continuity_mode = tok[2] == "true";
            else if (tok[0] == "xi_max_factor") gains.xi_max_factor = parse_num(at, tok[2]);
            else if (tok[0] == "eta_floor") gains.eta_floor = parse_num(at, tok[2]);
            else fail(at, "unknown gain '" + tok[0] + "'");
        } else if (at.section == "schedule") {
            need_dim("[schedule]");
            if (tok[0] == "piece") {
                if (tok.size() != 3) fail(at, "expected 'piece <t_start> <t_end>'");
                SchedulePiece p;
                p.t_start = parse_num(at, tok[1]);
                p.t_end = parse_num(at, tok[2]);
                p.delta.kind = VectorSpec::Kind::Constant;
                p.delta.value = Vector::Zero(d);
                pieces.push_back(p);
                in_piece = true;
            } else if (!in_piece) {
                fail(at, "schedule directive outside a piece");
            } else if (tok[0] == "beta") {
                ScalarSpec& s = pieces.back().beta;
                if (tok.size() >= 3 && tok[1] == "const") {
                    s.kind = ScalarSpec::Kind::Constant;
                    s.value = parse_num(at, tok[2]);
                } else if (tok.size() == 4 && tok[1] == "linear") {
                    s.kind = ScalarSpec::Kind::Linear;
                    s.from = parse_num(at, tok[2]);
                    s.to = parse_num(at, tok[3]);
                } else if (tok.size() == 6 && tok[1] == "sin") {
                    s.kind = ScalarSpec::Kind::Sinusoid;
                    s.offset = parse_num(at, tok[2]);
                    s.amplitude = parse_num(at, tok[3]);
                    s.omega = parse_num(at, tok[4]);
                    s.phase = parse_num(at, tok[5]);
                } else {
                    fail(at, "malformed beta spec");
                }
            } else if (tok[0] == "rot") {
                RotationSpec& s = pieces.back().rot;
                size_t base;
                if (tok.size() >= 3 && tok[1] == "const") {
                    s.angle0 = parse_num(at, tok[2]);
                    s.rate = 0.0;
                    base = 3;
                } else if (tok.size() >= 4 && tok[1] == "rate") {
                    s.rate = parse_num(at, tok[2]);
                    s.angle0 = parse_num(at, tok[3]);
                    base = 4;
                } else {
                    fail(at, "malformed rot spec");
                }
                if (tok.size() == base + 3 && tok[base] == "plane") {
                    s.axis_a = parse_int(at, tok[base + 1]);
                    s.axis_b = parse_int(at, tok[base + 2]);
                } else if (tok.size() != base) {
                    fail(at, "malformed rot spec");
                }
            } else if (tok[0] == "delta") {
                VectorSpec& s = pieces.back().delta;
                auto grab = [&](size_t from, int count) {
                    Vector v(count);
                    for (int k = 0; k < count; ++k) v(k) = parse_num(at, tok[from + k]);
                    return v;
                };
                if (tok[1] == "const" && static_cast<int>(tok.size()) == 2 + d) {
                    s.kind = VectorSpec::Kind::Constant;
                    s.value = grab(2, d);
                } else if (tok[1] == "linear" && static_cast<int>(tok.size()) == 2 + 2 * d) {
                    s.kind = VectorSpec::Kind::Linear;
                    s.from = grab(2, d);
                    s.to = grab(2 + d, d);
                } else if (tok[1] == "sin" && static_cast<int>(tok.size()) == 4 + 2 * d) {
                    s.kind = VectorSpec::Kind::Sinusoid;
                    s.offset = grab(2, d);
                    s.amplitude = grab(2 + d, d);
                    s.omega = parse_num(at, tok[2 + 2 * d]);
                    s.phase = parse_num(at, tok[3 + 2 * d]);
                } else {
                    fail(at, "malformed delta spec");
                }
            } else {
                fail(at, "unknown schedule directive '" + tok[0] + "'");
            }
        } else if (at.section == "sim") {
            need_dim("[sim]");
            if (tok[0] == "init" || tok[0] == "est") {
                if (static_cast<int>(tok.size()) != 2 + d)
                    fail(at, "expected '" + tok[0] + " <id>: " + std::to_string(d) +
                                 " coordinates'");
                const int id = parse_id_colon(at, tok[1]);
                std::vector<double> row;
                for (int k = 0; k < d; ++k) row.push_back(parse_num(at, tok[2 + k]));
                (tok[0] == "init" ? init_rows : est_rows)[id] = row;
            } else {
                if (tok.size() != 3 || tok[1] != "=") fail(at, "expected 'key = value'");
                if (tok[0] == "dt") dt = parse_num(at, tok[2]);
                else if (tok[0] == "t_end") t_end = parse_num(at, tok[2]);
                else if (tok[0] == "epsilon") eps = parse_num(at, tok[2]);
                else if (tok[0] == "log_stride") log_stride = parse_int(at, tok[2]);
                else if (tok[0] == "seed") seed = static_cast<std::uint64_t>(parse_num(at, tok[2]));
                else if (tok[0] == "tol_rank") tol.rank = parse_num(at, tok[2]);
                else if (tok[0] == "tol_wii") tol.wii = parse_num(at, tok[2]);
                else if (tok[0] == "tol_coincide") tol.coincide = parse_num(at, tok[2]);
                else if (tok[0] == "tol_angle") tol.angle = parse_num(at, tok[2]);
                else if (tok[0] == "tol_bearing") tol.bearing = parse_num(at, tok[2]);
                else if (tok[0] == "tol_psd") tol.psd_scale = parse_num(at, tok[2]);
                else fail(at, "unknown sim key '" + tok[0] + "'");
            }
        } else if (at.section.empty()) {
            fail(at, "content before the first section header");
        } else {
            fail(at, "unknown section [" + at.section + "]");
        }
    }

    // --- assembly + validation -------------------------------------------
    at.section = "meta";
    if (d < 2 || n < 1 || m < 1) fail(at, "d (>=2), n and m must all be declared");

    at.section = "nominal";
    Matrix r(n, d);
    for (int i = 1; i <= n; ++i) {
        auto it = nominal_rows.find(i);
        if (it == nominal_rows.end()) fail(at, "missing nominal position of agent " +
                                                   std::to_string(i));
        for (int k = 0; k < d; ++k) r(i - 1, k) = it->second[k];
    }

    at.section = "graph";
    for (const auto& [a, b] : edges)
        if (a < 1 || a > n || b < 1 || b > n || a == b)
            fail(at, "edge (" + std::to_string(a) + ", " + std::to_string(b) +
                         ") references invalid agents");
    FormationGraph graph;
    graph.n = n;
    graph.m = m;
    graph.d = d;
    graph.edges = edges;
    graph.layers = layers;
    graph.neighbor_sets = neighbor_sets;

    at.section = "followers";
    for (AgentId i = m + 1; i <= n; ++i)
        if (!models.count(i))
            fail(at, "follower " + std::to_string(i) + " has no measurement kind");
    for (const auto& [id, q] : models)
        if (id <= m || id > n)
            fail(at, "measurement kind declared for non-follower " + std::to_string(id));

    ScenarioConfig sc;
    sc.name = name;
    sc.tol = tol;

    ValidationReport report = validate_graph(graph);
    if (!report.valid()) throw ValidationError(report.to_string());
    sc.nominal = make_nominal_formation(graph, r, tol);
    sc.follower_models = models;

    for (const auto& [id, q] : frames_raw) {
        Matrix Q(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) Q(a, b) = q[a * d + b];
        if ((Q.transpose() * Q - Matrix::Identity(d, d)).lpNorm<Eigen::Infinity>() > 1e-9 ||
            std::abs(Q.determinant() - 1.0) > 1e-9)
            throw ValidationError("local frame of agent " + std::to_string(id) +
                                  " is not a proper rotation");
        sc.local_frames[id] = Q;
    }

    validate_gains(gains);
    sc.gains = gains;

    sc.dt = dt;
    sc.eps = eps;
    sc.log_stride = std::max(1, log_stride);
    sc.seed = seed;
    if (t_end < 0.0) t_end = pieces.empty() ? 10.0 : pieces.back().t_end;
    sc.t_end = t_end;

    if (pieces.empty()) {
        SchedulePiece p;
        p.t_start = 0.0;
        p.t_end = sc.t_end;
        p.beta.kind = ScalarSpec::Kind::Constant;
        p.beta.value = 1.0;
        p.delta.kind = VectorSpec::Kind::Constant;
        p.delta.value = Vector::Zero(d);
        pieces.push_back(p);
    }
    sc.schedule.pieces = pieces;
    validate_schedule(sc.schedule, d);

    if (!init_rows.empty()) {
        sc.initial_positions = target_configuration(sc.nominal, sc.schedule, 0.0).p;
        for (const auto& [id, row] : init_rows) {
            if (id < 1 || id > n) throw ValidationError("init row for unknown agent");
            for (int k = 0; k < d; ++k) sc.initial_positions(id - 1, k) = row[k];
        }
    }
    if (!est_rows.empty()) {
        sc.initial_estimates = sc.initial_positions.size() > 0
                                   ? sc.initial_positions
                                   : target_configuration(sc.nominal, sc.schedule, 0.0).p;
        for (const auto& [id, row] : est_rows) {
            if (id <= m || id > n)
                throw ValidationError("est row must name a follower");
            for (int k = 0; k < d; ++k) sc.initial_estimates(id - 1, k) = row[k];
        }
    }
    return sc;
}

ScenarioConfig parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), std::filesystem::path(path).stem().string());
}

std::string serialize_scenario(const ScenarioConfig& sc) {
    const FormationGraph& g = sc.nominal.graph;
    std::ostringstream os;
    os << "[meta]\n";
    os << "d = " << g.d << "\nn = " << g.n << "\nm = " << g.m << "\n\n";

    os << "[nominal]\n";
    for (int i = 1; i <= g.n; ++i) {
        os << i << ":";
        for (int k = 0; k < g.d; ++k) os << " " << fmt(sc.nominal.r(i - 1, k));
        os << "\n";
    }

    os << "\n[graph]\n";
    for (const auto& [a, b] : g.edges) os << "edge " << a << " " << b << "\n";
    for (const auto& [i, nbrs] : g.neighbor_sets) {
        os << "neighbors " << i << ":";
        for (AgentId j : nbrs) os << " " << j;
        os << "\n";
    }

    os << "\n[followers]\n";
    for (const auto& [i, model] : sc.follower_models) {
        os << i << ": " << to_string(model.kind);
        if (model.frame == Frame::Local) os << " local";
        os << "\n";
    }
    for (const auto& [i, Q] : sc.local_frames) {
        os << "frame " << i << ":";
        for (int a = 0; a < g.d; ++a)
            for (int b = 0; b < g.d; ++b) os << " " << fmt(Q(a, b));
        os << "\n";
    }

    os << "\n[gains]\n";
    os << "a1 = " << fmt(sc.gains.a1) << "\na2 = " << fmt(sc.gains.a2) << "\na3 = "
       << fmt(sc.gains.a3) << "\na4 = " << fmt(sc.gains.a4) << "\n";
    os << "continuity = " << (sc.gains.continuity_mode ? "true" : "false") << "\n";
    os << "xi_max_factor = " << fmt(sc.gains.xi_max_factor) << "\n";
    os << "eta_floor = " << fmt(sc.gains.eta_floor) << "\n";

    os << "\n[schedule]\n";
    for (const SchedulePiece& p : sc.schedule.pieces) {
        os << "piece " << fmt(p.t_start) << " " << fmt(p.t_end) << "\n";
        os << "  beta ";
        switch (p.beta.kind) {
            case ScalarSpec::Kind::Constant: os << "const " << fmt(p.beta.value); break;
            case ScalarSpec::Kind::Linear:
                os << "linear " << fmt(p.beta.from) << " " << fmt(p.beta.to);
                break;
            case ScalarSpec::Kind::Sinusoid:
                os << "sin " << fmt(p.beta.offset) << " " << fmt(p.beta.amplitude) << " "
                   << fmt(p.beta.omega) << " " << fmt(p.beta.phase);
                break;
        }
        os << "\n  rot ";
        if (p.rot.rate == 0.0) os << "const " << fmt(p.rot.angle0);
        else os << "rate " << fmt(p.rot.rate) << " " << fmt(p.rot.angle0);
        os << " plane " << p.rot.axis_a << " " << p.rot.axis_b << "\n";
        os << "  delta ";
        auto put = [&](const Vector& v) {
            for (int k = 0; k < v.size(); ++k) os << " " << fmt(v(k));
        };
        switch (p.delta.kind) {
            case VectorSpec::Kind::Constant: os << "const"; put(p.delta.value); break;
            case VectorSpec::Kind::Linear:
                os << "linear";
                put(p.delta.from);
                put(p.delta.to);
                break;
            case VectorSpec::Kind::Sinusoid:
                os << "sin";
                put(p.delta.offset);
                put(p.delta.amplitude);
                os << " " << fmt(p.delta.omega) << " " << fmt(p.delta.phase);
                break;
        }
        os << "\n";
    }

    os << "\n[sim]\n";
    os << "dt = " << fmt(sc.dt) << "\nt_end = " << fmt(sc.t_end) << "\nepsilon = "
       << fmt(sc.eps) << "\n";
    os << "log_stride = " << sc.log_stride << "\nseed = " << sc.seed << "\n";
    os << "tol_rank = " << fmt(sc.tol.rank) << "\ntol_wii = " << fmt(sc.tol.wii)
       << "\ntol_coincide = " << fmt(sc.tol.coincide) << "\ntol_angle = " << fmt(sc.tol.angle)
       << "\ntol_bearing = " << fmt(sc.tol.bearing) << "\ntol_psd = " << fmt(sc.tol.psd_scale)
       << "\n";
    if (sc.initial_positions.size() > 0)
        for (int i = 1; i <= g.n; ++i) {
            os << "init " << i << ":";
            for (int k = 0; k < g.d; ++k) os << " " << fmt(sc.initial_positions(i - 1, k));
            os << "\n";
        }
    if (sc.initial_estimates.size() > 0)
        for (int i = g.m + 1; i <= g.n; ++i) {
            os << "est " << i << ":";
            for (int k = 0; k < g.d; ++k) os << " " << fmt(sc.initial_estimates(i - 1, k));
            os << "\n";
        }
    return os.str();
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);  // LF line endings on every platform
    if (!out) throw IoError("cannot open for writing: " + p.string());
    return out;
}

}  // namespace

void write_trajectory(const TrajectoryLog& log, const std::string& out_dir, double eps) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    {
        std::ofstream out = open_out(fs::path(out_dir) / "trajectory.csv");
        out << trajectory_header(log.d) << "\n";
        for (const Sample& s : log.samples) {
            for (int i = 1; i <= log.n; ++i) {
                out << fmt(s.t) << "," << i;
                for (int k = 0; k < log.d; ++k) out << "," << fmt(s.p(i - 1, k));
                for (int k = 0; k < log.d; ++k) out << "," << fmt(s.p_hat(i - 1, k));
                out << "," << to_string(s.mode[i - 1]);
                out << "," << fmt(s.err_track(i - 1)) << "," << fmt(s.err_est(i - 1)) << ","
                    << fmt(s.err_bar(i - 1));
                for (int k = 0; k < log.d; ++k) out << "," << fmt(s.u(i - 1, k));
                out << "\n";
            }
        }
    }
    {
        std::ofstream out = open_out(fs::path(out_dir) / "events.csv");
        out << "t,agent,event\n";
        for (const Event& e : log.events)
            out << fmt(e.t) << "," << e.agent << "," << to_string(e.kind) << "\n";
    }
    {
        Metrics metrics = error_metrics(log, eps);
        std::ofstream out = open_out(fs::path(out_dir) / "summary.csv");
        out << "agent,arrival_time,settle_time,peak_err_track,peak_err_est,peak_err_bar\n";
        for (const auto& [agent, am] : metrics.agents)
            out << agent << "," << fmt(am.arrival_time) << "," << fmt(am.settle_time) << ","
                << fmt(am.peak_track) << "," << fmt(am.peak_est) << "," << fmt(am.peak_bar)
                << "\n";
    }
}

}  // namespace formctl
