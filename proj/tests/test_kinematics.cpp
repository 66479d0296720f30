#include "rhotraj/kinematics.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rhotraj;

TEST_CASE("uniform grid slot count") {
    const Grid grid = build_uniform_grid(500.0, 10.0, 30.0);
    CHECK(grid.size() == 1500);
    CHECK(grid.n_fine == 1500);
    CHECK(grid.dt(0) == doctest::Approx(1.0 / 3.0));
    CHECK(grid.end_s() == doctest::Approx(500.0));
    // non-integral ratio rounds up and shrinks the slot
    const Grid odd = build_uniform_grid(100.0, 70.0, 30.0);
    CHECK(odd.size() == 43);
    CHECK(odd.dt(0) * 30.0 <= 70.0);
    CHECK(ceil_count(2.0000000000001) == 2);
}

TEST_CASE("window grids") {
    const RhoConfig cfg{30.0, 120.0, 120.0, 80.0};
    CHECK(window_count(600.0, cfg) == 7);
    CHECK(committed_slots(cfg, 30.0) == 80);

    const Grid first = build_window_grid(1, 600.0, cfg, 30.0);
    CHECK(first.n_fine == 120);
    CHECK(first.n_coarse == 120);
    CHECK(first.dt(first.size() - 1) == doctest::Approx(4.0));
    CHECK(first.end_s() == doctest::Approx(600.0));

    const Grid mid = build_window_grid(3, 600.0, cfg, 30.0);
    CHECK(mid.begin_s() == doctest::Approx(160.0));
    CHECK(mid.n_coarse == 80);

    // remaining 120 s: terminal, fine only
    const Grid last = build_window_grid(7, 600.0, cfg, 30.0);
    CHECK(last.begin_s() == doctest::Approx(480.0));
    CHECK(last.n_fine == 120);
    CHECK(last.n_coarse == 0);

    CHECK_THROWS_AS(committed_slots(RhoConfig{30.0, 120.0, 120.0, 80.5}, 30.0), InvariantError);
}

TEST_CASE("propagation satisfies the discrete dynamics") {
    const Grid grid = build_uniform_grid(20.0, 30.0, 30.0);
    Points2 a(2, grid.size());
    for (int n = 0; n < grid.size(); ++n) {
        a.col(n) = Vec2(std::cos(0.3 * n), std::sin(0.2 * n));
    }
    const TrajectoryPlan plan = propagate(Vec2(5.0, -3.0), Vec2(12.0, 4.0), a, grid);
    // closed form for constant dt
    Vec2 q = plan.q.col(0);
    Vec2 v = plan.v.col(0);
    for (int n = 0; n + 1 < plan.size(); ++n) {
        q += v + 0.5 * a.col(n);
        v += a.col(n);
        CHECK((plan.q.col(n + 1) - q).norm() < 1e-12);
    }
    const FeasibilityReport report = check_feasibility(plan, UavParams{});
    CHECK(report.max_dynamics_residual < 1e-14);
}

TEST_CASE("feasibility check reports each family") {
    const Grid grid = build_uniform_grid(10.0, 30.0, 30.0);
    TrajectoryPlan plan = propagate(Vec2::Zero(), Vec2(20.0, 0.0), Points2::Zero(2, grid.size()), grid);
    CHECK(check_feasibility(plan, UavParams{}).pass);

    TrajectoryPlan fast = plan;
    fast.v.col(3) = Vec2(31.0, 0.0);
    const FeasibilityReport r = check_feasibility(fast, UavParams{});
    CHECK(r.has(ViolationKind::speed_high));
    CHECK(r.has(ViolationKind::dynamics_velocity));

    TrajectoryPlan slow = propagate(Vec2::Zero(), Vec2(4.0, 0.0), Points2::Zero(2, grid.size()), grid);
    CHECK(check_feasibility(slow, UavParams{}).has(ViolationKind::speed_low));

    TrajectoryPlan jerky = plan;
    jerky.a.col(0) = Vec2(0.0, 3.5);
    CHECK(check_feasibility(jerky, UavParams{}).has(ViolationKind::acceleration));
    CHECK(check_feasibility(jerky, UavParams{}).has(ViolationKind::dynamics_position));

    // within the relative tolerance
    TrajectoryPlan edge = propagate(Vec2::Zero(), Vec2(30.0 * (1.0 + 1e-7), 0.0), Points2::Zero(2, grid.size()), grid);
    CHECK(check_feasibility(edge, UavParams{}).pass);
}

TEST_CASE("circular initial trajectory") {
    const Scenario s = testing::random_scenario(4);
    const Grid grid = build_uniform_grid(s.period_s, 10.0, s.uav.v_max);
    const TrajectoryPlan plan = circular_init(s, grid);
    const FeasibilityReport r = check_feasibility(plan, s.uav);
    CHECK(r.max_speed <= s.uav.v_max * (1.0 + 1e-9));
    CHECK(r.min_speed >= s.uav.v_min * (1.0 - 1e-9));
    CHECK(r.max_dynamics_residual < 1e-3);
}

TEST_CASE("terminal steering hits the target state") {
    const Grid grid = build_uniform_grid(60.0, 10.0, 30.0);
    const Points2 a = Points2::Zero(2, grid.size());
    TrajectoryPlan plan = propagate(Vec2::Zero(), Vec2(15.0, 0.0), a, grid);
    const Vec2 q_end(880.0, 40.0);
    const Vec2 v_end(14.0, 1.0);
    steer_terminal(plan, q_end, v_end);
    const TrajectoryPlan again = propagate(plan.q.col(0), plan.v.col(0), plan.a, grid);
    CHECK((again.q.col(again.size() - 1) - q_end).norm() < 1e-8);
    CHECK((again.v.col(again.size() - 1) - v_end).norm() < 1e-10);
    CHECK((plan.q - again.q).norm() < 1e-8);
}

TEST_CASE("slice, append and sample") {
    const Grid grid = build_uniform_grid(30.0, 30.0, 30.0);
    Points2 a(2, grid.size());
    a.row(0).setLinSpaced(-1.0, 1.0);
    a.row(1).setConstant(0.3);
    const TrajectoryPlan plan = propagate(Vec2(1.0, 2.0), Vec2(10.0, -5.0), a, grid);
    TrajectoryPlan head = slice(plan, 0, 12);
    append(head, slice(plan, 12, plan.size() - 12));
    CHECK(head.q == plan.q);
    CHECK(head.grid == plan.grid);

    const auto [q, v] = sample(plan, plan.grid.start(7) + 0.25);
    const double dt = 0.25;
    CHECK((q - (plan.q.col(7) + plan.v.col(7) * dt + 0.5 * plan.a.col(7) * dt * dt)).norm() < 1e-12);
    CHECK((v - (plan.v.col(7) + plan.a.col(7) * dt)).norm() < 1e-12);
}
