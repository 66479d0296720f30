#include "rhotraj/planner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace rhotraj {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Boundary closing_boundary(const TrajectoryPlan& plan, const Boundary& boundary) {
    if (!boundary.periodic) {
        return boundary;
    }
    Boundary b = boundary;
    b.end_q = plan.q.col(0);
    b.end_v = plan.v.col(0);
    return b;
}

/// Projects `target` onto the feasible set and removes the residual boundary error.
TrajectoryPlan feasible_start(const TrajectoryPlan& target, const Boundary& boundary, const Scenario& scenario,
                              const PlannerSettings& settings, int window) {
    TrajectoryPlan plan = project_feasible(target, boundary, scenario.uav, window, settings.solver);
    const Boundary end = closing_boundary(plan, boundary);
    steer_terminal(plan, end.end_q, end.end_v);
    return plan;
}

Schedule rows(const Schedule& schedule, int first, int count) {
    return {schedule.rho.middleRows(first, count)};
}

void append_rows(Schedule& head, const Schedule& tail) {
    const Eigen::Index n_head = head.rho.rows();
    head.rho.conservativeResize(n_head + tail.rho.rows(), tail.rho.cols());
    head.rho.bottomRows(tail.rho.rows()) = tail.rho;
}

void finish_report(SolveReport& report, const Scenario& scenario) {
    const ThroughputReport bits = throughput(report.plan, report.schedule, scenario);
    report.per_node_bits = bits.per_node_bits;
    report.energy = plan_energy(report.plan, scenario.uav);
    report.ee_bpj = bits.min_bits / report.energy.total_j;
}

} // namespace

Efficiency evaluate(const TrajectoryPlan& plan, const Schedule& schedule, const WindowState& state,
                    const Scenario& scenario) {
    Efficiency out;
    const ThroughputReport bits = throughput(plan, schedule, scenario, state.accumulated_bits);
    out.per_node_bits = bits.per_node_bits;
    out.min_bits = bits.min_bits;
    out.energy_j = state.accumulated_energy_j + plan_energy(plan, scenario.uav).total_j;
    out.ee = out.min_bits / out.energy_j;
    return out;
}

BcdResult bcd_solve(const TrajectoryPlan& init, const WindowState& state, const Scenario& scenario,
                    const PlannerSettings& settings, int window) {
    const Grid& grid = init.grid;
    const Boundary boundary = Boundary::from_state(state);
    BcdResult out;
    out.plan = init;

    ScheduleResult sched = solve_schedule(grid, rate_matrix(out.plan, scenario), state.accumulated_bits, settings.solver);
    ++out.subproblems;
    if (!sched.schedule.rho.size()) {
        throw InfeasibleError("window " + std::to_string(window) + ": schedule program " +
                                  conic::to_string(sched.status),
                              window);
    }
    out.schedule = sched.schedule;
    Efficiency current = evaluate(out.plan, out.schedule, state, scenario);
    out.ee_trace.push_back(current.ee);

    double radius = settings.trust_radius_factor * grid.delta1_s * scenario.uav.v_max;
    int halvings = 0;
    for (int iter = 1; iter <= settings.bcd_max_iter; ++iter) {
        out.iterations = iter;
        const double previous = current.ee;

        // trajectory block: Dinkelbach over SCA surrogates
        double lambda = current.ee;
        for (int inner = 0; inner < settings.dinkelbach_max_iter && halvings <= settings.max_trust_halvings; ++inner) {
            SurrogateOptions options;
            options.lambda = lambda;
            options.trust_radius_m = radius;
            const ConvexSubproblem sub = build_trajectory_surrogate(out.plan, out.schedule, state, scenario, options);
            const conic::Solution sol = conic::solve(sub.program, settings.solver);
            ++out.subproblems;
            if (!sol.optimal()) {
                spdlog::debug("window {} iter {}: trajectory subproblem {}", window, iter, conic::to_string(sol.status));
                radius *= 0.5;
                ++halvings;
                continue;
            }
            // eta - lambda * energy at the surrogate optimum, in bits
            const double gain = -(sol.primal_objective + sub.objective_constant) * sub.bits_scale;

            TrajectoryPlan candidate = extract_plan(sub, sol, grid);
            const Boundary end = closing_boundary(candidate, boundary);
            steer_terminal(candidate, end.end_q, end.end_v);
            const Efficiency trial = evaluate(candidate, out.schedule, state, scenario);
            const bool feasible = check_feasibility(candidate, scenario.uav).pass;
            spdlog::debug("window {} iter {}.{}: radius {:.4g} m, surrogate gain {:.6g} bits, ee {:.9g} -> {:.9g}{}", window,
                          iter, inner, radius, gain, current.ee, trial.ee, feasible ? "" : " (infeasible)");
            if (feasible && trial.ee >= current.ee) {
                out.plan = std::move(candidate);
                current = trial;
                lambda = current.ee;
            } else {
                radius *= 0.5;
                ++halvings;
            }
            if (gain <= settings.dinkelbach_tol * lambda * current.energy_j) {
                break;
            }
        }

        // schedule block
        sched = solve_schedule(grid, rate_matrix(out.plan, scenario), state.accumulated_bits, settings.solver);
        ++out.subproblems;
        if (sched.schedule.rho.size()) {
            const Efficiency trial = evaluate(out.plan, sched.schedule, state, scenario);
            if (trial.ee >= current.ee) {
                out.schedule = sched.schedule;
                current = trial;
            }
        }
        out.ee_trace.push_back(current.ee);
        spdlog::debug("window {} iter {}: ee {:.9g}", window, iter, current.ee);
        if (current.ee - previous < settings.bcd_rel_tol * previous) {
            break;
        }
    }
    out.eta_bits = current.min_bits;
    out.energy_j = current.energy_j;
    return out;
}

SolveReport solve_conventional(const Scenario& scenario, double delta1_m, const PlannerSettings& settings) {
    const auto start = Clock::now();
    const Grid grid = build_uniform_grid(scenario.period_s, delta1_m, scenario.uav.v_max);
    const WindowState state = WindowState::initial(scenario.node_count());
    const TrajectoryPlan init =
        feasible_start(circular_init(scenario, grid), Boundary::from_state(state), scenario, settings, 1);
    BcdResult res = bcd_solve(init, state, scenario, settings, 1);

    SolveReport report;
    report.method = "conventional";
    report.delta1_m = delta1_m;
    report.plan = std::move(res.plan);
    report.schedule = std::move(res.schedule);
    report.anchor_q = report.plan.q.col(0);
    report.anchor_v = report.plan.v.col(0);
    report.windows.push_back({1, grid.n_fine, 0, res.iterations, res.subproblems, res.ee_trace, seconds_since(start)});
    report.wall_s = seconds_since(start);
    finish_report(report, scenario);
    spdlog::info("conventional: N={} ee={:.6g} bits/J in {:.3f} s", grid.size(), report.ee_bpj, report.wall_s);
    return report;
}

SolveReport solve_rho(const Scenario& scenario, const RhoConfig& cfg, const PlannerSettings& settings) {
    validate(cfg, scenario.period_s);
    const auto start = Clock::now();
    const double vmax = scenario.uav.v_max;
    const int windows = window_count(scenario.period_s, cfg);
    const int committed = windows > 1 ? committed_slots(cfg, vmax) : 0;

    SolveReport report;
    report.method = "rho";
    report.delta1_m = cfg.delta1_m;
    report.rho = cfg;

    WindowState state = WindowState::initial(scenario.node_count());
    TrajectoryPlan previous;
    for (int k = 1; k <= windows; ++k) {
        const auto window_start = Clock::now();
        const Grid grid = build_window_grid(k, scenario.period_s, cfg, vmax);
        const TrajectoryPlan guess =
            k == 1 ? circular_init(scenario, grid)
                   : resample(previous, grid, previous.grid.start(0) + previous.grid.n_fine * previous.grid.delta1_s);
        const TrajectoryPlan init = feasible_start(guess, Boundary::from_state(state), scenario, settings, k);
        BcdResult res = bcd_solve(init, state, scenario, settings, k);

        const bool terminal = k == windows;
        const int keep = terminal ? res.plan.size() : committed;
        const TrajectoryPlan done = slice(res.plan, 0, keep);
        const Schedule done_schedule = rows(res.schedule, 0, keep);
        state.accumulated_bits += throughput(done, done_schedule, scenario).per_node_bits;
        state.accumulated_energy_j += plan_energy(done, scenario.uav).propulsion_j;
        if (k == 1) {
            state.anchor_q = res.plan.q.col(0);
            state.anchor_v = res.plan.v.col(0);
        }
        if (!terminal) {
            state.next_start = res.plan.q.col(keep);
            state.next_velocity = res.plan.v.col(keep);
        }
        append(state.executed, done);
        append_rows(state.executed_schedule, done_schedule);
        previous = std::move(res.plan);

        report.windows.push_back({k, grid.n_fine, grid.n_coarse, res.iterations, res.subproblems, res.ee_trace,
                                  seconds_since(window_start)});
        spdlog::debug("window {}/{}: N1={} N2={} iters={} ee={:.9g}", k, windows, grid.n_fine, grid.n_coarse,
                      res.iterations, res.ee_trace.back());
    }

    report.plan = std::move(state.executed);
    report.schedule = std::move(state.executed_schedule);
    report.anchor_q = *state.anchor_q;
    report.anchor_v = *state.anchor_v;
    report.wall_s = seconds_since(start);
    finish_report(report, scenario);
    spdlog::info("rho: K={} ee={:.6g} bits/J in {:.3f} s", windows, report.ee_bpj, report.wall_s);
    return report;
}

} // namespace rhotraj
