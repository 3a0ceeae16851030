#include "formctl/sim.hpp"

#include <algorithm>
#include <cmath>

namespace formctl {

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Arrived: return "Arrived";
        case EventKind::SwitchToManeuvering: return "Maintaining->Maneuvering";
        case EventKind::SwitchToMaintaining: return "Maneuvering->Maintaining";
    }
    return "?";
}

namespace {

struct StageEval {
    Matrix dp;       // control input per agent
    Matrix dp_hat;   // estimate derivative per agent
};

// Inter-neighbor distance blocks are built from transmitted estimates, which
// are only eps-accurate once the neighbors have arrived; the embedding clamp
// must absorb that model error or the distance/ratio solvers reject every
// live snapshot.
Tolerances live_solver_tolerances(const ScenarioConfig& sc) {
    Tolerances t = sc.tol;
    t.psd_scale = std::max(t.psd_scale, sc.eps);
    return t;
}

// Estimates every agent publishes at this instant: leaders expose their true
// position and actual velocity; followers expose the estimate cascade
// computed earlier in the same stage (designated neighbors have smaller
// indices, so evaluation in index order is well defined).
StageEval eval_vector_field(const ScenarioConfig& sc, const std::vector<Mode>& modes,
                            const std::vector<bool>& arrived, double t, const Matrix& p,
                            const Matrix& p_hat) {
    const FormationGraph& graph = sc.nominal.graph;
    const int n = graph.n, d = graph.d;
    TargetState target = target_configuration(sc.nominal, sc.schedule, t);

    StageEval ev{Matrix::Zero(n, d), Matrix::Zero(n, d)};
    std::map<AgentId, NeighborState> published;

    for (AgentId i = 1; i <= graph.m; ++i) {
        const Vector e = (p.row(i - 1) - target.p.row(i - 1)).transpose();
        const Vector u = leader_control(e, target.v.row(i - 1).transpose(), sc.gains);
        ev.dp.row(i - 1) = u.transpose();
        ev.dp_hat.row(i - 1) = u.transpose();
        published[i] = NeighborState{p.row(i - 1).transpose(), u, arrived[i - 1]};
    }

    for (AgentId i = graph.m + 1; i <= graph.n; ++i) {
        const FollowerWeights& w = sc.nominal.weights.at(i);
        const Vector phi = p_hat.row(i - 1).transpose();
        FollowerCommand cmd;
        bool maneuvered = false;
        if (modes[i - 1] == Mode::Maneuvering) {
            // A maneuvering-eligible follower whose live constraint cannot be
            // solved or cannot localize it stays on the maintaining law.
            try {
                MeasurementSnapshot snap =
                    synthesize_snapshot(p, published, graph, i, sc.follower_models.at(i),
                                        sc.local_frames, t, sc.tol);
                DisplacementConstraint h =
                    solve_displacement(snap, d, live_solver_tolerances(sc));
                cmd = maneuver_control(phi, published, w, h, sc.gains, sc.tol);
                maneuvered = true;
            } catch (const Error&) {
                maneuvered = false;
            }
        }
        if (!maneuvered) cmd = maintain_control(phi, published, w, sc.gains);
        ev.dp.row(i - 1) = cmd.u.transpose();
        ev.dp_hat.row(i - 1) = cmd.p_hat_dot.transpose();
        published[i] = NeighborState{phi, cmd.p_hat_dot, arrived[i - 1]};
    }
    return ev;
}

void check_finite(const SimState& state) {
    const double limit = 1e12;
    if (!state.p.allFinite() || !state.p_hat.allFinite() ||
        state.p.lpNorm<Eigen::Infinity>() > limit ||
        state.p_hat.lpNorm<Eigen::Infinity>() > limit)
        throw NumericalBlowup("state norm exceeded 1e12 at t = " + std::to_string(state.t));
}

}  // namespace

StepResult rk4_step(const SimState& state, double dt, const ScenarioConfig& scenario,
                    const std::vector<Mode>& modes, const std::vector<bool>& arrived) {
    const double t = state.t;
    StageEval k1 = eval_vector_field(scenario, modes, arrived, t, state.p, state.p_hat);
    StageEval k2 = eval_vector_field(scenario, modes, arrived, t + dt / 2,
                                     state.p + dt / 2 * k1.dp,
                                     state.p_hat + dt / 2 * k1.dp_hat);
    StageEval k3 = eval_vector_field(scenario, modes, arrived, t + dt / 2,
                                     state.p + dt / 2 * k2.dp,
                                     state.p_hat + dt / 2 * k2.dp_hat);
    StageEval k4 = eval_vector_field(scenario, modes, arrived, t + dt,
                                     state.p + dt * k3.dp, state.p_hat + dt * k3.dp_hat);

    StepResult out;
    out.next.t = t + dt;
    out.next.p = state.p + dt / 6.0 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp);
    out.next.p_hat =
        state.p_hat + dt / 6.0 * (k1.dp_hat + 2 * k2.dp_hat + 2 * k3.dp_hat + k4.dp_hat);
    // Leader estimates are their true positions by definition.
    out.next.p_hat.topRows(scenario.nominal.graph.m) =
        out.next.p.topRows(scenario.nominal.graph.m);
    out.u = k1.dp;
    out.p_hat_dot = k1.dp_hat;
    check_finite(out.next);
    return out;
}

namespace {

Sample make_sample(const ScenarioConfig& sc, const SimState& state,
                   const std::vector<Mode>& modes, const Matrix& u) {
    const FormationGraph& graph = sc.nominal.graph;
    const int n = graph.n;
    TargetState target = target_configuration(sc.nominal, sc.schedule, state.t);

    Sample s;
    s.t = state.t;
    s.p = state.p;
    s.p_hat = state.p_hat;
    s.u = u;
    s.mode = modes;
    s.err_track = (state.p - target.p).rowwise().norm();
    s.err_est = Vector::Zero(n);
    s.err_bar = Vector::Zero(n);
    for (AgentId i = graph.m + 1; i <= n; ++i) {
        const FollowerWeights& w = sc.nominal.weights.at(i);
        Vector mix = Vector::Zero(graph.d);
        for (size_t k = 0; k < w.neighbors.size(); ++k)
            mix += (w.w(k) / w.w_ii) * state.p_hat.row(w.neighbors[k] - 1).transpose();
        s.err_bar(i - 1) = (state.p.row(i - 1).transpose() - mix).norm();
        s.err_est(i - 1) = (state.p_hat.row(i - 1) - state.p.row(i - 1)).norm();
    }
    return s;
}

}  // namespace

TrajectoryLog run_scenario(const ScenarioConfig& sc) {
    const FormationGraph& graph = sc.nominal.graph;
    const int n = graph.n, m = graph.m, d = graph.d;

    validate_gains(sc.gains);
    validate_schedule(sc.schedule, d);
    if (!(sc.dt > 0.0)) throw ValidationError("dt must be positive");
    if (sc.t_end < sc.dt) throw ValidationError("t_end must cover at least one step");
    if (sc.t_end > sc.schedule.t_end() + 1e-12)
        throw ScheduleExhausted("t_end exceeds the schedule horizon");
    for (AgentId i = m + 1; i <= n; ++i) {
        if (!sc.follower_models.count(i))
            throw ValidationError("no measurement kind declared for follower " +
                                  std::to_string(i));
        validate_model(sc.follower_models.at(i));
    }

    SimState state;
    state.t = 0.0;
    if (sc.initial_positions.size() > 0) {
        if (sc.initial_positions.rows() != n || sc.initial_positions.cols() != d)
            throw ValidationError("initial positions must be n x d");
        state.p = sc.initial_positions;
    } else {
        state.p = target_configuration(sc.nominal, sc.schedule, 0.0).p;
    }
    state.p_hat = state.p;
    if (sc.initial_estimates.size() > 0) {
        if (sc.initial_estimates.rows() != n || sc.initial_estimates.cols() != d)
            throw ValidationError("initial estimates must be n x d");
        state.p_hat.bottomRows(n - m) = sc.initial_estimates.bottomRows(n - m);
    }

    std::vector<bool> arrived(n, false);
    std::vector<Mode> modes(n, Mode::Maintaining);
    for (AgentId i = 1; i <= m; ++i) modes[i - 1] = Mode::Leader;

    TrajectoryLog log;
    log.n = n;
    log.m = m;
    log.d = d;
    log.dt = sc.dt;

    const long steps = static_cast<long>(std::ceil(sc.t_end / sc.dt - 1e-9));
    std::vector<size_t> pending_switches;

    for (long k = 0; k < steps; ++k) {
        const double t = k * sc.dt;
        const double h = std::min(sc.dt, sc.t_end - t);
        state.t = t;

        StepResult step = rk4_step(state, h, sc, modes, arrived);

        // Completes any switch recorded at this step's start.
        for (size_t idx : pending_switches) {
            log.switches[idx].u_after =
                step.u.row(log.switches[idx].agent - 1).transpose();
        }
        pending_switches.clear();

        if (k % sc.log_stride == 0)
            log.samples.push_back(make_sample(sc, state, modes, step.u));

        const SimState& next = step.next;
        TargetState target_next = target_configuration(sc.nominal, sc.schedule, next.t);

        // Arrival flags from the end-of-step state; the (c) test and the
        // latch see the flags that were visible during the step.
        std::vector<bool> new_arrived = arrived;
        std::map<AgentId, NeighborState> published;
        for (AgentId i = 1; i <= n; ++i)
            published[i] = NeighborState{next.p_hat.row(i - 1).transpose(), Vector::Zero(d),
                                         arrived[i - 1]};
        for (AgentId i = 1; i <= m; ++i) {
            const Vector e = (next.p.row(i - 1) - target_next.p.row(i - 1)).transpose();
            new_arrived[i - 1] = leader_arrival(e, sc.eps, arrived[i - 1]);
        }
        for (AgentId i = m + 1; i <= n; ++i) {
            const FollowerWeights& w = sc.nominal.weights.at(i);
            bool neighbors_done = true;
            for (AgentId j : w.neighbors)
                if (!arrived[j - 1]) neighbors_done = false;
            if (!neighbors_done) continue;  // latch holds; nothing to re-check yet
            try {
                MeasurementSnapshot snap =
                    synthesize_snapshot(next.p, published, graph, i, sc.follower_models.at(i),
                                        sc.local_frames, next.t, sc.tol);
                DisplacementConstraint hc =
                    solve_displacement(snap, d, live_solver_tolerances(sc));
                new_arrived[i - 1] = follower_arrival(next.p_hat.row(i - 1).transpose(),
                                                      published, w, hc, sc.eps,
                                                      arrived[i - 1], sc.tol);
            } catch (const Error&) {
                // Transiently unsolvable or unlocalizable: no arrival verdict.
            }
        }

        for (AgentId i = 1; i <= n; ++i) {
            if (!arrived[i - 1] && new_arrived[i - 1]) {
                log.events.push_back({next.t, i, EventKind::Arrived});
                log.arrival_time.emplace(i, next.t);
            }
        }
        arrived = new_arrived;

        for (AgentId i = m + 1; i <= n; ++i) {
            const FollowerWeights& w = sc.nominal.weights.at(i);
            std::vector<bool> flags;
            for (AgentId j : w.neighbors) flags.push_back(arrived[j - 1]);
            const Mode want = update_mode(flags);
            if (want != modes[i - 1]) {
                log.events.push_back({next.t, i,
                                      want == Mode::Maneuvering
                                          ? EventKind::SwitchToManeuvering
                                          : EventKind::SwitchToMaintaining});
                SwitchRecord rec;
                rec.t = next.t;
                rec.agent = i;
                rec.from = modes[i - 1];
                rec.to = want;
                rec.u_before = step.u.row(i - 1).transpose();
                rec.u_after = Vector::Zero(d);
                pending_switches.push_back(log.switches.size());
                log.switches.push_back(std::move(rec));
                modes[i - 1] = want;
            }
        }

        state = next;
    }

    // Final sample (and any trailing switch record) at t_end.
    state.t = sc.t_end;
    StageEval final_eval =
        eval_vector_field(sc, modes, arrived, state.t, state.p, state.p_hat);
    for (size_t idx : pending_switches)
        log.switches[idx].u_after = final_eval.dp.row(log.switches[idx].agent - 1).transpose();
    pending_switches.clear();
    log.samples.push_back(make_sample(sc, state, modes, final_eval.dp));

    return log;
}

Metrics error_metrics(const TrajectoryLog& log, double eps) {
    Metrics metrics;
    if (log.samples.empty()) return metrics;
    const size_t ns = log.samples.size();

    for (AgentId i = 1; i <= log.n; ++i) {
        AgentMetrics am;
        const bool leader = i <= log.m;
        for (const Sample& s : log.samples) {
            am.peak_track = std::max(am.peak_track, s.err_track(i - 1));
            am.peak_est = std::max(am.peak_est, s.err_est(i - 1));
            am.peak_bar = std::max(am.peak_bar, s.err_bar(i - 1));
        }
        // Last sample whose relevant error exceeds eps; settled right after.
        am.settle_time = 0.0;
        for (size_t k = ns; k-- > 0;) {
            const Sample& s = log.samples[k];
            const double err = leader ? s.err_track(i - 1)
                                      : std::max(s.err_est(i - 1), s.err_bar(i - 1));
            if (err > eps) {
                am.settle_time = (k + 1 < ns) ? log.samples[k + 1].t : s.t;
                break;
            }
        }
        auto it = log.arrival_time.find(i);
        am.arrival_time = it == log.arrival_time.end() ? -1.0 : it->second;

        if (!leader) {
            for (size_t k = 0; k + 1 < ns; ++k) {
                const Sample& a = log.samples[k];
                const Sample& b = log.samples[k + 1];
                if (a.mode[i - 1] != Mode::Maintaining || b.mode[i - 1] != Mode::Maintaining)
                    continue;
                const double na = std::hypot(a.err_bar(i - 1), a.err_est(i - 1));
                const double nb = std::hypot(b.err_bar(i - 1), b.err_est(i - 1));
                am.max_maintaining_increase = std::max(am.max_maintaining_increase, nb - na);
            }
            for (const SwitchRecord& sw : log.switches)
                if (sw.agent == i)
                    am.max_switch_jump =
                        std::max(am.max_switch_jump, (sw.u_after - sw.u_before).norm());
        }
        metrics.agents[i] = am;
    }
    return metrics;
}

}  // namespace formctl
