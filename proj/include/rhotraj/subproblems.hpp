#ifndef RHOTRAJ_SUBPROBLEMS_HPP
#define RHOTRAJ_SUBPROBLEMS_HPP

#include "rhotraj/comms.hpp"
#include "rhotraj/conic.hpp"
#include "rhotraj/energy.hpp"
#include "rhotraj/kinematics.hpp"
#include "rhotraj/scenario.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace rhotraj {

/// State carried from one window to the next.
struct WindowState {
    Eigen::VectorXd accumulated_bits;   // per node
    double accumulated_energy_j = 0.0;
    Vec2 next_start = Vec2::Zero();     // position where the next window starts
    Vec2 next_velocity = Vec2::Zero();  // velocity there
    std::optional<Vec2> anchor_q;       // first committed waypoint; empty before window 1 is solved
    std::optional<Vec2> anchor_v;
    TrajectoryPlan executed;
    Schedule executed_schedule;

    static WindowState initial(std::size_t n_nodes);
    /// No anchors yet: the window closes on itself instead.
    bool periodic() const { return !anchor_q.has_value(); }
};

/// How the first and last waypoints of a window are constrained.
struct Boundary {
    bool periodic = true;           // q[N] = q[1], v[N] = v[1]
    Vec2 start_q = Vec2::Zero();    // otherwise pinned start ...
    Vec2 start_v = Vec2::Zero();
    Vec2 end_q = Vec2::Zero();      // ... and pinned end
    Vec2 end_v = Vec2::Zero();

    static Boundary from_state(const WindowState& state);
};

/// A conic program together with the index layout of its variables.
struct ConvexSubproblem {
    conic::Program program;
    double objective_constant = 0.0;
    int slots = 0;
    int nodes = 0;
    // per-slot variable indices, -1 when absent
    Eigen::Matrix2Xi q, v, a;
    Eigen::VectorXi tau, speed, speed_sq, cube, inv_power;
    Eigen::MatrixXi rho;     // schedule program
    Eigen::MatrixXi sqdist;  // trajectory program, only where rho > 0
    int eta = -1;
    double bits_scale = 1.0; // eta variable is bits / bits_scale

    /// Variables in the formulation with one q, v, a, tau and L shares per
    /// slot plus eta: (6 + L) N + 1.
    long paper_variable_count() const { return static_cast<long>(6 + nodes) * slots + 1; }
};

/// max eta  s.t.  carry_l + sum_n dt_n r(n, l) rho(n, l) >= eta,  sum_l rho(n, l) <= 1,  rho >= 0.
ConvexSubproblem build_schedule_program(const Grid& grid, const Eigen::MatrixXd& rates, const Eigen::VectorXd& carry);

struct ScheduleResult {
    Schedule schedule;
    double eta_bits = 0.0;
    conic::Status status = conic::Status::numerical_failure;
};

/// Solves the schedule program and clips the shares back onto the simplex.
ScheduleResult solve_schedule(const Grid& grid, const Eigen::MatrixXd& rates, const Eigen::VectorXd& carry,
                              const conic::Settings& settings = {});

/// Tangent of f(x) = B log2(1 + snr / x^alpha) at x_r: f(x) >= value + slope (x - x_r).
struct RateTangent {
    double value;
    double slope;  // <= 0
    double operator()(double x) const;
};

RateTangent rate_tangent(double x_r, double snr, double alpha, double bandwidth_hz);

/// Lower bound on the rate to `node` at q, tangent at the reference position q_r.
double surrogate_rate(const Vec2& q, const Vec2& q_r, const GroundNode& node, const Scenario& scenario);

/// Gradient of the true rate with respect to the UAV position.
Vec2 rate_gradient(const Vec2& q, const GroundNode& node, const Scenario& scenario);

/// Gradient of the surrogate rate with respect to q, at q.
Vec2 surrogate_rate_gradient(const Vec2& q, const Vec2& q_r, const GroundNode& node, const Scenario& scenario);

/// Linearized squared speed |v_r|^2 + 2 v_r'(v - v_r), a lower bound on |v|^2.
double linearized_speed_sq(const Vec2& v, const Vec2& v_r);

/// Upper bound on the propulsion power c1 |v|^3 + c2 / tau (1 + |a|^2 / g^2)
/// with tau^2 the linearized squared speed. Infinite where that is not positive.
double surrogate_power(const Vec2& v, const Vec2& a, const Vec2& v_r, const UavParams& uav);

struct SurrogateOptions {
    double lambda = 0.0;       // bits per joule
    double trust_radius_m = 0.0; // <= 0 disables the trust region
    double margin = 1e-7;      // relative shrink of speed/acceleration bounds
};

/// Convex restriction of the window problem at `reference`:
/// minimize -eta + lambda * energy subject to the dynamics, the boundary,
/// speed and acceleration limits, the linearized minimum speed, and the
/// throughput rows built from rate tangents. Throws std::invalid_argument when
/// the reference is below the minimum speed.
ConvexSubproblem build_trajectory_surrogate(const TrajectoryPlan& reference, const Schedule& schedule,
                                            const WindowState& state, const Scenario& scenario,
                                            const SurrogateOptions& options);

/// Plan propagated from the solved first state and accelerations.
TrajectoryPlan extract_plan(const ConvexSubproblem& sub, const conic::Solution& solution, const Grid& grid);

/// Feasible plan on `target.grid` closest to `target` in summed waypoint
/// distance, keeping the direction of motion from `target`. Throws
/// InfeasibleError tagged with `window` when no such plan exists.
TrajectoryPlan project_feasible(const TrajectoryPlan& target, const Boundary& boundary, const UavParams& uav,
                                int window, const conic::Settings& settings = {});

} // namespace rhotraj

#endif
