#include "rhotraj/kinematics.hpp"

#include "rhotraj/energy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rhotraj {

bool operator==(const Grid& lhs, const Grid& rhs) {
    if (lhs.n_fine != rhs.n_fine || lhs.n_coarse != rhs.n_coarse || lhs.slots.size() != rhs.slots.size()) {
        return false;
    }
    for (std::size_t i = 0; i < lhs.slots.size(); ++i) {
        if (lhs.slots[i].start_s != rhs.slots[i].start_s || lhs.slots[i].duration_s != rhs.slots[i].duration_s) {
            return false;
        }
    }
    return true;
}

int ceil_count(double x) {
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
        return static_cast<int>(nearest);
    }
    return static_cast<int>(std::ceil(x));
}

Grid build_uniform_grid(double period_s, double delta1_m, double v_max) {
    if (!(period_s > 0.0 && delta1_m > 0.0 && v_max > 0.0)) {
        throw std::invalid_argument("build_uniform_grid: arguments must be positive");
    }
    Grid grid;
    grid.delta1_s = delta1_m / v_max;
    grid.delta2_s = grid.delta1_s;
    grid.n_fine = ceil_count(period_s * v_max / delta1_m);
    grid.slots.reserve(static_cast<std::size_t>(grid.n_fine));
    for (int n = 0; n < grid.n_fine; ++n) {
        grid.slots.push_back({n * grid.delta1_s, grid.delta1_s});
    }
    return grid;
}

int window_count(double period_s, const RhoConfig& cfg) {
    return ceil_count((period_s - cfg.window_s) / cfg.execute_s) + 1;
}

int committed_slots(const RhoConfig& cfg, double v_max) {
    const double count = cfg.execute_s * v_max / cfg.delta1_m;
    const double nearest = std::round(count);
    if (nearest < 1.0 || std::abs(count - nearest) > 1e-9 * count) {
        throw InvariantError("rho.execute_s", "must be a whole number of fine slots (delta1_m / vmax_mps)");
    }
    return static_cast<int>(nearest);
}

Grid build_window_grid(int k, double period_s, const RhoConfig& cfg, double v_max) {
    const int windows = window_count(period_s, cfg);
    if (k < 1 || k > windows) {
        throw std::out_of_range("window index " + std::to_string(k) + " outside [1, " + std::to_string(windows) + "]");
    }
    Grid grid;
    grid.delta1_s = cfg.delta1_m / v_max;
    grid.delta2_s = cfg.delta2_m / v_max;
    const double t0 = (k - 1) * cfg.execute_s;
    const double remaining = period_s - t0;
    if (k == windows || remaining <= cfg.window_s * (1.0 + 1e-12)) {
        grid.n_fine = ceil_count(remaining / grid.delta1_s);
        grid.n_coarse = 0;
    } else {
        grid.n_fine = ceil_count(cfg.window_s / grid.delta1_s);
        grid.n_coarse = ceil_count((remaining - cfg.window_s) / grid.delta2_s);
    }
    grid.slots.reserve(static_cast<std::size_t>(grid.n_fine + grid.n_coarse));
    for (int n = 0; n < grid.n_fine; ++n) {
        grid.slots.push_back({t0 + n * grid.delta1_s, grid.delta1_s});
    }
    const double coarse_t0 = t0 + grid.n_fine * grid.delta1_s;
    for (int n = 0; n < grid.n_coarse; ++n) {
        grid.slots.push_back({coarse_t0 + n * grid.delta2_s, grid.delta2_s});
    }
    return grid;
}

TrajectoryPlan propagate(const Vec2& q0, const Vec2& v0, const Points2& a, const Grid& grid) {
    if (a.cols() != grid.size()) {
        throw std::invalid_argument("propagate: acceleration count " + std::to_string(a.cols()) +
                                    " does not match slot count " + std::to_string(grid.size()));
    }
    TrajectoryPlan plan;
    plan.grid = grid;
    plan.a = a;
    const Eigen::Index n_slots = a.cols();
    plan.q.resize(2, n_slots);
    plan.v.resize(2, n_slots);
    if (n_slots == 0) {
        return plan;
    }
    plan.q.col(0) = q0;
    plan.v.col(0) = v0;
    for (Eigen::Index n = 0; n + 1 < n_slots; ++n) {
        const double dt = grid.dt(static_cast<int>(n));
        plan.v.col(n + 1) = plan.v.col(n) + a.col(n) * dt;
        plan.q.col(n + 1) = plan.q.col(n) + plan.v.col(n) * dt + 0.5 * a.col(n) * dt * dt;
    }
    return plan;
}

std::string to_string(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::speed_low: return "speed_low";
    case ViolationKind::speed_high: return "speed_high";
    case ViolationKind::acceleration: return "acceleration";
    case ViolationKind::dynamics_position: return "dynamics_position";
    case ViolationKind::dynamics_velocity: return "dynamics_velocity";
    }
    return "unknown";
}

bool FeasibilityReport::has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; });
}

FeasibilityReport check_feasibility(const TrajectoryPlan& plan, const UavParams& uav, double tol,
                                    double dynamics_tol) {
    FeasibilityReport report;
    const int n_slots = plan.size();
    if (plan.v.cols() != n_slots || plan.a.cols() != n_slots || plan.grid.size() != n_slots) {
        throw std::invalid_argument("check_feasibility: inconsistent plan dimensions");
    }
    report.min_speed = n_slots > 0 ? plan.v.col(0).norm() : 0.0;
    for (int n = 0; n < n_slots; ++n) {
        const double speed = plan.v.col(n).norm();
        const double accel = plan.a.col(n).norm();
        report.max_speed = std::max(report.max_speed, speed);
        report.min_speed = std::min(report.min_speed, speed);
        report.max_accel = std::max(report.max_accel, accel);
        if (speed > uav.v_max * (1.0 + tol)) {
            report.violations.push_back({ViolationKind::speed_high, n, speed, uav.v_max});
        }
        if (speed < uav.v_min * (1.0 - tol)) {
            report.violations.push_back({ViolationKind::speed_low, n, speed, uav.v_min});
        }
        if (accel > uav.a_max * (1.0 + tol)) {
            report.violations.push_back({ViolationKind::acceleration, n, accel, uav.a_max});
        }
        if (n + 1 < n_slots) {
            const double dt = plan.grid.dt(n);
            const Vec2 q_next = plan.q.col(n) + plan.v.col(n) * dt + 0.5 * plan.a.col(n) * dt * dt;
            const Vec2 v_next = plan.v.col(n) + plan.a.col(n) * dt;
            const double rq = (plan.q.col(n + 1) - q_next).norm() / std::max(1.0, plan.q.col(n + 1).norm());
            const double rv = (plan.v.col(n + 1) - v_next).norm() / std::max(1.0, plan.v.col(n + 1).norm());
            report.max_dynamics_residual = std::max({report.max_dynamics_residual, rq, rv});
            // report the slot whose state is inconsistent with its predecessor
            if (rq > dynamics_tol) {
                report.violations.push_back({ViolationKind::dynamics_position, n + 1, rq, dynamics_tol});
            }
            if (rv > dynamics_tol) {
                report.violations.push_back({ViolationKind::dynamics_velocity, n + 1, rv, dynamics_tol});
            }
        }
    }
    report.pass = report.violations.empty();
    return report;
}

CircleSpec circle_for(const Scenario& scenario, double period_s) {
    const UavParams& uav = scenario.uav;
    Vec2 center = Vec2::Zero();
    for (const auto& node : scenario.nodes) {
        center += node.position;
    }
    center /= static_cast<double>(std::max<std::size_t>(1, scenario.nodes.size()));

    const double two_pi = 2.0 * std::numbers::pi;
    double speed = std::clamp(min_power_speed(uav), uav.v_min, uav.v_max);
    // centripetal acceleration V^2 / r with r = V T / (2 pi) is 2 pi V / T
    if (two_pi * speed / period_s > uav.a_max) {
        speed = uav.a_max * period_s / two_pi;
        if (speed < uav.v_min) {
            throw InfeasibleError("no circular trajectory of period " + std::to_string(period_s) +
                                  " s respects both vmin and amax");
        }
    }
    return {center, speed * period_s / two_pi, speed};
}

TrajectoryPlan circular_init(const Scenario& scenario, const Grid& grid) {
    const CircleSpec circle = circle_for(scenario, scenario.period_s);
    const double omega = circle.speed_mps / circle.radius_m;
    const double t0 = grid.begin_s();
    auto velocity = [&](double t) -> Vec2 {
        const double theta = omega * (t - t0);
        return Vec2(-std::sin(theta), std::cos(theta)) * circle.speed_mps;
    };

    const int n_slots = grid.size();
    Points2 a(2, n_slots);
    for (int n = 0; n < n_slots; ++n) {
        const double t = grid.start(n);
        const double dt = grid.dt(n);
        a.col(n) = (velocity(t + dt) - velocity(t)) / dt;
    }
    const Vec2 q0 = circle.center + Vec2(circle.radius_m, 0.0);
    return propagate(q0, velocity(t0), a, grid);
}

std::pair<Vec2, Vec2> sample(const TrajectoryPlan& plan, double t_s) {
    const auto& slots = plan.grid.slots;
    if (slots.empty()) {
        throw std::invalid_argument("sample: empty plan");
    }
    auto it = std::upper_bound(slots.begin(), slots.end(), t_s,
                               [](double t, const Slot& slot) { return t < slot.start_s; });
    const Eigen::Index n = it == slots.begin() ? 0 : std::distance(slots.begin(), it) - 1;
    const double tau = t_s - slots[static_cast<std::size_t>(n)].start_s;
    const Vec2 q = plan.q.col(n) + plan.v.col(n) * tau + 0.5 * plan.a.col(n) * tau * tau;
    const Vec2 v = plan.v.col(n) + plan.a.col(n) * tau;
    return {q, v};
}

TrajectoryPlan resample(const TrajectoryPlan& source, const Grid& grid, double identity_until_s) {
    const int n_slots = grid.size();
    TrajectoryPlan out;
    out.grid = grid;
    out.q.resize(2, n_slots);
    out.v.resize(2, n_slots);
    out.a.resize(2, n_slots);
    if (n_slots == 0) {
        return out;
    }
    const double src_last = source.grid.start(source.size() - 1);
    const double dst_last = grid.start(n_slots - 1);
    auto map_time = [&](double t) {
        if (t <= identity_until_s || dst_last <= identity_until_s) {
            return t;
        }
        return identity_until_s + (t - identity_until_s) * (src_last - identity_until_s) / (dst_last - identity_until_s);
    };
    for (int n = 0; n < n_slots; ++n) {
        auto [q, v] = sample(source, map_time(grid.start(n)));
        out.q.col(n) = q;
        out.v.col(n) = v;
    }
    for (int n = 0; n + 1 < n_slots; ++n) {
        out.a.col(n) = (out.v.col(n + 1) - out.v.col(n)) / grid.dt(n);
    }
    {
        const double t = map_time(grid.start(n_slots - 1));
        auto it = std::upper_bound(source.grid.slots.begin(), source.grid.slots.end(), t,
                                   [](double x, const Slot& slot) { return x < slot.start_s; });
        const Eigen::Index idx = it == source.grid.slots.begin() ? 0 : std::distance(source.grid.slots.begin(), it) - 1;
        out.a.col(n_slots - 1) = source.a.col(idx);
    }
    return out;
}

void steer_terminal(TrajectoryPlan& plan, const Vec2& q_end, const Vec2& v_end) {
    const int n_slots = plan.size();
    if (n_slots < 2) {
        return;
    }
    const double t0 = plan.grid.start(0);
    const double span = plan.grid.start(n_slots - 1) - t0;

    // response of (q_end, v_end) to a unit constant and a unit ramp in a[0..N-2]
    Eigen::Matrix2d response;
    for (int basis = 0; basis < 2; ++basis) {
        double q = 0.0;
        double v = 0.0;
        for (int n = 0; n + 1 < n_slots; ++n) {
            const double dt = plan.grid.dt(n);
            const double u = basis == 0 ? 1.0 : (plan.grid.start(n) - t0) / span;
            q += v * dt + 0.5 * u * dt * dt;
            v += u * dt;
        }
        response(0, basis) = q;
        response(1, basis) = v;
    }
    const auto solver = response.completeOrthogonalDecomposition();
    const Vec2 dq = q_end - plan.q.col(n_slots - 1);
    const Vec2 dv = v_end - plan.v.col(n_slots - 1);
    for (int axis = 0; axis < 2; ++axis) {
        const Eigen::Vector2d coeff = solver.solve(Eigen::Vector2d(dq(axis), dv(axis)));
        for (int n = 0; n + 1 < n_slots; ++n) {
            plan.a(axis, n) += coeff(0) + coeff(1) * (plan.grid.start(n) - t0) / span;
        }
    }
    plan = propagate(plan.q.col(0), plan.v.col(0), plan.a, plan.grid);
}

TrajectoryPlan slice(const TrajectoryPlan& plan, int first, int count) {
    if (first < 0 || count < 0 || first + count > plan.size()) {
        throw std::out_of_range("slice: range outside plan");
    }
    TrajectoryPlan out;
    out.q = plan.q.middleCols(first, count);
    out.v = plan.v.middleCols(first, count);
    out.a = plan.a.middleCols(first, count);
    out.grid.delta1_s = plan.grid.delta1_s;
    out.grid.delta2_s = plan.grid.delta2_s;
    out.grid.slots.assign(plan.grid.slots.begin() + first, plan.grid.slots.begin() + first + count);
    for (int n = first; n < first + count; ++n) {
        (plan.grid.is_fine(n) ? out.grid.n_fine : out.grid.n_coarse) += 1;
    }
    return out;
}

void append(TrajectoryPlan& head, const TrajectoryPlan& tail) {
    if (tail.size() == 0) {
        return;
    }
    if (head.size() == 0) {
        head = tail;
        return;
    }
    const double gap = std::abs(head.grid.end_s() - tail.grid.begin_s());
    if (gap > 1e-9 * std::max(1.0, head.grid.end_s())) {
        throw std::invalid_argument("append: tail does not start where head ends");
    }
    if (head.grid.n_coarse > 0 && tail.grid.n_fine > 0) {
        throw std::invalid_argument("append: fine slots cannot follow coarse slots");
    }
    const Eigen::Index n_head = head.q.cols();
    const Eigen::Index n_total = n_head + tail.q.cols();
    head.q.conservativeResize(2, n_total);
    head.v.conservativeResize(2, n_total);
    head.a.conservativeResize(2, n_total);
    head.q.rightCols(tail.q.cols()) = tail.q;
    head.v.rightCols(tail.q.cols()) = tail.v;
    head.a.rightCols(tail.q.cols()) = tail.a;
    head.grid.slots.insert(head.grid.slots.end(), tail.grid.slots.begin(), tail.grid.slots.end());
    head.grid.n_fine += tail.grid.n_fine;
    head.grid.n_coarse += tail.grid.n_coarse;
}

} // namespace rhotraj
