#include "rhotraj/energy.hpp"

#include <doctest.h>

#include <cmath>

using namespace rhotraj;

TEST_CASE("power at known operating points") {
    const UavParams uav;
    CHECK(level_power(20.0, uav) == doctest::Approx(325.0).epsilon(1e-15));
    // with a = 3 m/s^2: 250 + 75 (1 + 9 / 96.04)
    const double expected = 250.0 + 75.0 * (1.0 + 9.0 / 96.04);
    const double p = instantaneous_power(Vec2(20.0, 0.0), Vec2(0.0, 3.0), uav);
    CHECK(std::abs(p - expected) / expected < 1e-12);
    CHECK(p == doctest::Approx(332.028).epsilon(1e-6));
    CHECK_THROWS_AS(instantaneous_power(Vec2::Zero().eval(), Vec2::Zero().eval(), uav), std::domain_error);
}

TEST_CASE("minimum-power speed agrees with a golden-section search") {
    const UavParams uav;
    double lo = 1.0;
    double hi = 40.0;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    while (hi - lo > 1e-10) {
        const double x1 = hi - phi * (hi - lo);
        const double x2 = lo + phi * (hi - lo);
        if (level_power(x1, uav) < level_power(x2, uav)) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    CHECK(min_power_speed(uav) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-7));
}

TEST_CASE("plan energy integrates slot power") {
    UavParams uav;
    const Grid grid = build_uniform_grid(10.0, 30.0, 30.0);  // 10 slots of 1 s
    Points2 a = Points2::Zero(2, grid.size());
    a.row(1).setConstant(0.5);
    const TrajectoryPlan plan = propagate(Vec2::Zero(), Vec2(20.0, 0.0), a, grid);
    double sum = 0.0;
    for (int n = 0; n < plan.size(); ++n) {
        sum += grid.dt(n) * instantaneous_power(plan.v.col(n), plan.a.col(n), uav);
    }
    const EnergyBreakdown e = plan_energy(plan, uav, 100.0);
    CHECK(e.propulsion_j == doctest::Approx(sum).epsilon(1e-12));
    CHECK(e.kinetic_delta_j == 0.0);  // massless
    CHECK(e.total_j == doctest::Approx(sum + 100.0).epsilon(1e-12));

    uav.mass_kg = 2.0;
    const EnergyBreakdown heavy = plan_energy(plan, uav);
    const double ke = 0.5 * 2.0 * (plan.v.col(plan.size() - 1).squaredNorm() - plan.v.col(0).squaredNorm());
    CHECK(heavy.kinetic_delta_j == doctest::Approx(ke));
}
