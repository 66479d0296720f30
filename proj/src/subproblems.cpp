#include "rhotraj/subproblems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rhotraj {

using conic::Affine;

WindowState WindowState::initial(std::size_t n_nodes) {
    WindowState state;
    state.accumulated_bits = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_nodes));
    state.executed_schedule.rho.resize(0, static_cast<Eigen::Index>(n_nodes));
    return state;
}

Boundary Boundary::from_state(const WindowState& state) {
    Boundary b;
    b.periodic = state.periodic();
    if (!b.periodic) {
        b.start_q = state.next_start;
        b.start_v = state.next_velocity;
        b.end_q = *state.anchor_q;
        b.end_v = *state.anchor_v;
    }
    return b;
}

namespace {

Affine var(int index, double coeff = 1.0) { return Affine::var(index, coeff); }

struct Layout {
    Eigen::Matrix2Xi q, v, a;
};

/// q, v, a per slot with the discrete dynamics and the boundary conditions.
Layout add_kinematics(conic::ProgramBuilder& b, const Grid& grid, const Boundary& boundary) {
    const int n_slots = grid.size();
    Layout lay{Eigen::Matrix2Xi(2, n_slots), Eigen::Matrix2Xi(2, n_slots), Eigen::Matrix2Xi(2, n_slots)};
    const char* axis = "xy";
    for (int n = 0; n < n_slots; ++n) {
        for (int i = 0; i < 2; ++i) {
            lay.q(i, n) = b.add_variable(std::string("q") + axis[i] + "[" + std::to_string(n) + "]");
            lay.v(i, n) = b.add_variable(std::string("v") + axis[i] + "[" + std::to_string(n) + "]");
            lay.a(i, n) = b.add_variable(std::string("a") + axis[i] + "[" + std::to_string(n) + "]");
        }
    }
    for (int n = 0; n + 1 < n_slots; ++n) {
        const double dt = grid.dt(n);
        for (int i = 0; i < 2; ++i) {
            b.add_equality(var(lay.v(i, n + 1)) - var(lay.v(i, n)) - var(lay.a(i, n), dt));
            b.add_equality(var(lay.q(i, n + 1)) - var(lay.q(i, n)) - var(lay.v(i, n), dt) - var(lay.a(i, n), 0.5 * dt * dt));
        }
    }
    const int last = n_slots - 1;
    for (int i = 0; i < 2; ++i) {
        if (boundary.periodic) {
            b.add_equality(var(lay.q(i, last)) - var(lay.q(i, 0)));
            b.add_equality(var(lay.v(i, last)) - var(lay.v(i, 0)));
        } else {
            b.add_equality(var(lay.q(i, 0)) - boundary.start_q(i));
            b.add_equality(var(lay.v(i, 0)) - boundary.start_v(i));
            b.add_equality(var(lay.q(i, last)) - boundary.end_q(i));
            b.add_equality(var(lay.v(i, last)) - boundary.end_v(i));
        }
    }
    return lay;
}

std::vector<Affine> pair_of(const Eigen::Matrix2Xi& idx, int n, double scale = 1.0, const Vec2& offset = Vec2::Zero()) {
    return {var(idx(0, n), scale) - offset(0) * scale, var(idx(1, n), scale) - offset(1) * scale};
}

TrajectoryPlan plan_from(const Layout& lay, const Eigen::VectorXd& x, const Grid& grid) {
    const int n_slots = grid.size();
    Points2 acc(2, n_slots);
    for (int n = 0; n < n_slots; ++n) {
        acc(0, n) = x(lay.a(0, n));
        acc(1, n) = x(lay.a(1, n));
    }
    const Vec2 q0(x(lay.q(0, 0)), x(lay.q(1, 0)));
    const Vec2 v0(x(lay.v(0, 0)), x(lay.v(1, 0)));
    return propagate(q0, v0, acc, grid);
}

} // namespace

// ---------------------------------------------------------------------------
// Schedule

ConvexSubproblem build_schedule_program(const Grid& grid, const Eigen::MatrixXd& rates, const Eigen::VectorXd& carry) {
    const int n_slots = grid.size();
    const int n_nodes = static_cast<int>(rates.cols());
    if (rates.rows() != n_slots || (carry.size() != 0 && carry.size() != n_nodes)) {
        throw std::invalid_argument("build_schedule_program: dimension mismatch");
    }
    ConvexSubproblem sub;
    sub.slots = n_slots;
    sub.nodes = n_nodes;
    // bits are carried in units of the largest per-second rate so the rows are O(dt)
    sub.bits_scale = std::max(rates.size() > 0 ? rates.maxCoeff() : 1.0, 1e-300);

    conic::ProgramBuilder b;
    sub.rho.resize(n_slots, n_nodes);
    for (int n = 0; n < n_slots; ++n) {
        for (int l = 0; l < n_nodes; ++l) {
            sub.rho(n, l) = b.add_variable("rho[" + std::to_string(n) + "," + std::to_string(l) + "]");
        }
    }
    sub.eta = b.add_variable("eta");
    b.minimize(var(sub.eta, -1.0));
    for (int l = 0; l < n_nodes; ++l) {
        Affine row = carry.size() ? Affine(carry(l) / sub.bits_scale) : Affine(0.0);
        for (int n = 0; n < n_slots; ++n) {
            const double coeff = grid.dt(n) * rates(n, l) / sub.bits_scale;
            if (coeff != 0.0) {
                row += var(sub.rho(n, l), coeff);
            }
        }
        b.add_nonnegative(row - var(sub.eta));
    }
    for (int n = 0; n < n_slots; ++n) {
        Affine row(1.0);
        for (int l = 0; l < n_nodes; ++l) {
            row -= var(sub.rho(n, l));
            b.add_nonnegative(var(sub.rho(n, l)));
        }
        b.add_nonnegative(row);
    }
    sub.program = b.build();
    return sub;
}

ScheduleResult solve_schedule(const Grid& grid, const Eigen::MatrixXd& rates, const Eigen::VectorXd& carry,
                              const conic::Settings& settings) {
    const ConvexSubproblem sub = build_schedule_program(grid, rates, carry);
    const conic::Solution sol = conic::solve(sub.program, settings);
    ScheduleResult out;
    out.status = sol.status;
    if (!sol.optimal()) {
        return out;
    }
    Eigen::MatrixXd rho(sub.slots, sub.nodes);
    for (int n = 0; n < sub.slots; ++n) {
        for (int l = 0; l < sub.nodes; ++l) {
            rho(n, l) = std::max(0.0, sol.x(sub.rho(n, l)));
        }
        const double total = rho.row(n).sum();
        if (total > 1.0) {
            rho.row(n) /= total;
        }
    }
    out.schedule.rho = rho;
    out.eta_bits = sol.x(sub.eta) * sub.bits_scale;
    return out;
}

// ---------------------------------------------------------------------------
// Surrogate bounds

double RateTangent::operator()(double x) const { return value + slope * x; }

RateTangent rate_tangent(double x_r, double snr, double alpha, double bandwidth_hz) {
    const double f = rate_at_squared_distance(x_r, snr, alpha, bandwidth_hz);
    const double slope = -bandwidth_hz * alpha * snr / (std::numbers::ln2 * x_r * (std::pow(x_r, alpha) + snr));
    return {f - slope * x_r, slope};
}

namespace {

double squared_distance(const Vec2& q, const GroundNode& node, const Scenario& scenario) {
    return scenario.uav.altitude_m * scenario.uav.altitude_m + (q - node.position).squaredNorm();
}

RateTangent tangent_at(const Vec2& q_r, const GroundNode& node, const Scenario& scenario) {
    return rate_tangent(squared_distance(q_r, node, scenario), reference_snr(node, scenario.channel),
                        scenario.channel.alpha(), scenario.channel.bandwidth_hz);
}

} // namespace

double surrogate_rate(const Vec2& q, const Vec2& q_r, const GroundNode& node, const Scenario& scenario) {
    return tangent_at(q_r, node, scenario)(squared_distance(q, node, scenario));
}

Vec2 rate_gradient(const Vec2& q, const GroundNode& node, const Scenario& scenario) {
    return tangent_at(q, node, scenario).slope * 2.0 * (q - node.position);
}

Vec2 surrogate_rate_gradient(const Vec2& q, const Vec2& q_r, const GroundNode& node, const Scenario& scenario) {
    return tangent_at(q_r, node, scenario).slope * 2.0 * (q - node.position);
}

double linearized_speed_sq(const Vec2& v, const Vec2& v_r) { return 2.0 * v_r.dot(v) - v_r.squaredNorm(); }

double surrogate_power(const Vec2& v, const Vec2& a, const Vec2& v_r, const UavParams& uav) {
    const double lin = linearized_speed_sq(v, v_r);
    if (!(lin > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    const double speed = v.norm();
    return uav.c1 * speed * speed * speed +
           uav.c2 / std::sqrt(lin) * (1.0 + a.squaredNorm() / (uav.gravity * uav.gravity));
}

// ---------------------------------------------------------------------------
// Trajectory surrogate

ConvexSubproblem build_trajectory_surrogate(const TrajectoryPlan& reference, const Schedule& schedule,
                                            const WindowState& state, const Scenario& scenario,
                                            const SurrogateOptions& options) {
    const Grid& grid = reference.grid;
    const UavParams& uav = scenario.uav;
    const int n_slots = grid.size();
    const int n_nodes = static_cast<int>(scenario.nodes.size());
    if (schedule.rho.rows() != n_slots || schedule.rho.cols() != n_nodes) {
        throw std::invalid_argument("build_trajectory_surrogate: schedule does not match the reference plan");
    }
    for (int n = 0; n < n_slots; ++n) {
        if (reference.v.col(n).norm() < uav.v_min * (1.0 - 1e-6)) {
            throw std::invalid_argument("build_trajectory_surrogate: reference speed below vmin at slot " +
                                        std::to_string(n));
        }
    }

    ConvexSubproblem sub;
    sub.slots = n_slots;
    sub.nodes = n_nodes;
    sub.bits_scale = scenario.channel.bandwidth_hz;
    conic::ProgramBuilder b;
    const Layout lay = add_kinematics(b, grid, Boundary::from_state(state));
    sub.q = lay.q;
    sub.v = lay.v;
    sub.a = lay.a;

    // speeds in units of vmax, powers in units of level power at vmax
    const double vs = uav.v_max;
    const double h2 = uav.altitude_m * uav.altitude_m;
    const double vmax = uav.v_max * (1.0 - options.margin);
    const double amax = uav.a_max * (1.0 - options.margin);

    sub.tau.resize(n_slots);
    sub.speed.resize(n_slots);
    sub.speed_sq.resize(n_slots);
    sub.cube.resize(n_slots);
    sub.inv_power.resize(n_slots);
    sub.sqdist = Eigen::MatrixXi::Constant(n_slots, n_nodes, -1);

    Affine energy;  // joules, excluding constants
    for (int n = 0; n < n_slots; ++n) {
        const std::string idx = "[" + std::to_string(n) + "]";
        const int tau = sub.tau(n) = b.add_variable("tau" + idx);
        const int t = sub.speed(n) = b.add_variable("t" + idx);
        const int z = sub.speed_sq(n) = b.add_variable("z" + idx);
        const int s = sub.cube(n) = b.add_variable("s" + idx);
        const int e = sub.inv_power(n) = b.add_variable("e" + idx);
        const Vec2 v_r = reference.v.col(n);

        // |v| <= t <= vmax, |a| <= amax (all in scaled units)
        std::vector<Affine> vt{var(t)};
        for (const auto& c : pair_of(lay.v, n, 1.0 / vs)) vt.push_back(c);
        b.add_soc(vt);
        b.add_nonnegative(std::max(vmax, reference.v.col(n).norm()) / vs - var(t));
        std::vector<Affine> ac{Affine(std::max(amax, reference.a.col(n).norm()) / uav.a_max)};
        for (const auto& c : pair_of(lay.a, n, 1.0 / uav.a_max)) ac.push_back(c);
        b.add_soc(ac);

        // linearized squared speed, in units of vs^2
        Affine lin = var(lay.v(0, n), 2.0 * v_r(0) / (vs * vs)) + var(lay.v(1, n), 2.0 * v_r(1) / (vs * vs)) -
                     v_r.squaredNorm() / (vs * vs);
        const double vmin_sq = std::min(uav.v_min * uav.v_min * (1.0 + 2.0 * options.margin), v_r.squaredNorm());
        b.add_nonnegative(lin - vmin_sq / (vs * vs));
        // tau^2 <= lin
        b.add_rotated_soc(0.5 * lin, Affine(1.0), {var(tau)});
        // e tau >= 1 + |a|^2 / g^2
        b.add_rotated_soc(var(e), var(tau, 0.5),
                          {Affine(1.0), var(lay.a(0, n), 1.0 / uav.gravity), var(lay.a(1, n), 1.0 / uav.gravity)});
        // z >= t^2, s t >= z^2  =>  s >= t^3
        b.add_rotated_soc(var(z), Affine(0.5), {var(t)});
        b.add_rotated_soc(var(s), var(t, 0.5), {var(z)});

        // c1 |v|^3 + c2 / |v| (1 + |a|^2/g^2) with |v| = vs t
        const double dt = grid.dt(n);
        energy += var(s, dt * uav.c1 * vs * vs * vs) + var(e, dt * uav.c2 / vs);
    }

    const double reach_m = options.trust_radius_m > 0.0 ? options.trust_radius_m : uav.v_max * grid.total_duration();

    // throughput rows
    sub.eta = b.add_variable("eta");
    for (int l = 0; l < n_nodes; ++l) {
        const GroundNode& node = scenario.nodes[static_cast<std::size_t>(l)];
        Affine row(state.accumulated_bits.size() ? state.accumulated_bits(l) / sub.bits_scale : 0.0);
        for (int n = 0; n < n_slots; ++n) {
            const double share = schedule.rho(n, l);
            if (share <= 1e-12) {
                continue;
            }
            const int x = sub.sqdist(n, l) =
                b.add_variable("x[" + std::to_string(n) + "," + std::to_string(l) + "]");
            // x h2 >= h2 + |q - w|^2
            b.add_rotated_soc(var(x, h2) - h2, Affine(0.5), pair_of(lay.q, n, 1.0, node.position));
            // implied by the trust region; keeps the optimal set bounded for nodes that do not bind
            const double reach = (reference.q.col(n) - node.position).norm() + reach_m;
            b.add_nonnegative(1.0 + reach * reach / h2 - var(x));
            const RateTangent tan = tangent_at(reference.q.col(n), node, scenario);
            const double w = grid.dt(n) * share / sub.bits_scale;
            row += Affine(w * tan.value) + var(x, w * tan.slope * h2);
        }
        b.add_nonnegative(row - var(sub.eta));
    }

    // trust region on waypoint moves
    if (options.trust_radius_m > 0.0) {
        for (int n = 0; n < n_slots; ++n) {
            std::vector<Affine> tr{Affine(1.0)};
            for (const auto& c : pair_of(lay.q, n, 1.0 / options.trust_radius_m, reference.q.col(n))) tr.push_back(c);
            b.add_soc(tr);
        }
    }

    const double kinetic =
        n_slots > 0 ? 0.5 * uav.mass_kg * (reference.v.col(n_slots - 1).squaredNorm() - reference.v.col(0).squaredNorm()) : 0.0;
    const double lam = options.lambda / sub.bits_scale;
    b.minimize(var(sub.eta, -1.0) + lam * energy);
    sub.objective_constant = lam * (state.accumulated_energy_j + kinetic);
    sub.program = b.build();
    return sub;
}

TrajectoryPlan extract_plan(const ConvexSubproblem& sub, const conic::Solution& solution, const Grid& grid) {
    return plan_from({sub.q, sub.v, sub.a}, solution.x, grid);
}

// ---------------------------------------------------------------------------
// Feasibility projection

TrajectoryPlan project_feasible(const TrajectoryPlan& target, const Boundary& boundary, const UavParams& uav,
                                int window, const conic::Settings& settings) {
    const Grid& grid = target.grid;
    const int n_slots = grid.size();
    const double margin = 1e-7;
    conic::ProgramBuilder b;
    const Layout lay = add_kinematics(b, grid, boundary);
    const double scale = std::max(1.0, uav.v_max * grid.delta1_s);

    Affine objective;
    Vec2 heading = Vec2::UnitX();
    for (int n = 0; n < n_slots; ++n) {
        const int d = b.add_variable("d[" + std::to_string(n) + "]");
        std::vector<Affine> dist{var(d)};
        for (const auto& c : pair_of(lay.q, n, 1.0 / scale, target.q.col(n))) dist.push_back(c);
        b.add_soc(dist);
        objective += var(d);

        std::vector<Affine> vc{Affine(1.0 - margin)};
        for (const auto& c : pair_of(lay.v, n, 1.0 / uav.v_max)) vc.push_back(c);
        b.add_soc(vc);
        std::vector<Affine> ac{Affine(1.0 - margin)};
        for (const auto& c : pair_of(lay.a, n, 1.0 / uav.a_max)) ac.push_back(c);
        b.add_soc(ac);

        if (target.v.col(n).norm() > 1e-9) {
            heading = target.v.col(n).normalized();
        }
        b.add_nonnegative(var(lay.v(0, n), heading(0) / uav.v_max) + var(lay.v(1, n), heading(1) / uav.v_max) -
                          uav.v_min * (1.0 + margin) / uav.v_max);
    }
    b.minimize(objective);
    const conic::Solution sol = conic::solve(b.build(), settings);
    if (sol.status == conic::Status::infeasible) {
        throw InfeasibleError("window " + std::to_string(window) +
                                  ": no trajectory meets the boundary conditions within the speed and acceleration limits",
                              window);
    }
    if (!sol.optimal()) {
        throw InfeasibleError("window " + std::to_string(window) + ": feasibility projection failed (" +
                                  conic::to_string(sol.status) + ")",
                              window);
    }
    return plan_from(lay, sol.x, grid);
}

} // namespace rhotraj
