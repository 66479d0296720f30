#ifndef RHOTRAJ_KINEMATICS_HPP
#define RHOTRAJ_KINEMATICS_HPP

#include "rhotraj/scenario.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace rhotraj {

using Points2 = Eigen::Matrix2Xd;

struct Slot {
    double start_s = 0.0;
    double duration_s = 0.0;
};

/// Time slots partitioning a horizon: `n_fine` slots of `delta1_s` followed by
/// `n_coarse` slots of `delta2_s`.
struct Grid {
    std::vector<Slot> slots;
    int n_fine = 0;
    int n_coarse = 0;
    double delta1_s = 0.0;
    double delta2_s = 0.0;

    int size() const { return static_cast<int>(slots.size()); }
    bool empty() const { return slots.empty(); }
    double dt(int n) const { return slots[static_cast<std::size_t>(n)].duration_s; }
    double start(int n) const { return slots[static_cast<std::size_t>(n)].start_s; }
    bool is_fine(int n) const { return n < n_fine; }
    double begin_s() const { return slots.empty() ? 0.0 : slots.front().start_s; }
    double end_s() const { return slots.empty() ? 0.0 : slots.back().start_s + slots.back().duration_s; }
    double total_duration() const { return end_s() - begin_s(); }
};

bool operator==(const Grid& lhs, const Grid& rhs);

/// Smallest integer >= x, tolerant to representation error in x.
int ceil_count(double x);

/// N = ceil(T v_max / delta1) slots of delta1 / v_max seconds.
Grid build_uniform_grid(double period_s, double delta1_m, double v_max);

/// Number of RHO windows, ceil((T - window) / execute) + 1.
int window_count(double period_s, const RhoConfig& cfg);

/// Slots committed per non-terminal window, execute_s / delta1_s.
/// Throws InvariantError when execute_s is not a whole number of fine slots.
int committed_slots(const RhoConfig& cfg, double v_max);

/// Grid of the k-th window (1-based). The terminal window, whose remaining
/// time does not exceed the window length, gets a fine horizon covering the
/// remainder and no coarse slots.
Grid build_window_grid(int k, double period_s, const RhoConfig& cfg, double v_max);

/// Waypoints, velocities and accelerations sampled at the slot starts of `grid`.
struct TrajectoryPlan {
    Points2 q;
    Points2 v;
    Points2 a;
    Grid grid;

    int size() const { return static_cast<int>(q.cols()); }
};

/// v[n+1] = v[n] + a[n] dt_n and q[n+1] = q[n] + v[n] dt_n + a[n] dt_n^2 / 2.
TrajectoryPlan propagate(const Vec2& q0, const Vec2& v0, const Points2& a, const Grid& grid);

enum class ViolationKind { speed_low, speed_high, acceleration, dynamics_position, dynamics_velocity };

std::string to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    int slot;
    double value;
    double limit;
};

struct FeasibilityReport {
    bool pass = true;
    std::vector<Violation> violations;
    double max_speed = 0.0;
    double min_speed = 0.0;
    double max_accel = 0.0;
    double max_dynamics_residual = 0.0;  // relative

    bool has(ViolationKind kind) const;
};

/// Speed/acceleration bounds are checked with relative tolerance `tol`;
/// dynamics residuals are relative to max(1, |q|) resp. max(1, |v|).
FeasibilityReport check_feasibility(const TrajectoryPlan& plan, const UavParams& uav, double tol = 1e-6,
                                    double dynamics_tol = 1e-9);

struct CircleSpec {
    Vec2 center;
    double radius_m;
    double speed_mps;
};

/// Circle about the node centroid flown once per period. Starts at the
/// minimum-power speed, clamped to [v_min, v_max], and slows toward v_min
/// while the centripetal acceleration exceeds a_max.
CircleSpec circle_for(const Scenario& scenario, double period_s);

/// Circular initial trajectory over `grid`; phase advances 2 pi t / T.
TrajectoryPlan circular_init(const Scenario& scenario, const Grid& grid);

/// Position and velocity at absolute time `t_s` under the plan's piecewise
/// constant acceleration. Times past the last slot extrapolate it.
std::pair<Vec2, Vec2> sample(const TrajectoryPlan& plan, double t_s);

/// Samples `source` at the knots of `grid` with a time map that is the
/// identity up to `identity_until_s` and then linearly stretches so the last
/// knots coincide. Accelerations are finite differences of the sampled
/// velocities; the result need not satisfy the dynamics exactly.
TrajectoryPlan resample(const TrajectoryPlan& source, const Grid& grid, double identity_until_s);

/// Adds a per-axis affine-in-time correction to a[0..N-2] so that the
/// propagated plan ends exactly at (q_end, v_end). q[0], v[0] are kept.
void steer_terminal(TrajectoryPlan& plan, const Vec2& q_end, const Vec2& v_end);

/// Slots [first, first + count) as a standalone plan.
TrajectoryPlan slice(const TrajectoryPlan& plan, int first, int count);

/// Appends `tail` to `head`; slot start times must line up.
void append(TrajectoryPlan& head, const TrajectoryPlan& tail);

} // namespace rhotraj

#endif
