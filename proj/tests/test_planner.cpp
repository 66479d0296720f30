#include "rhotraj/planner.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace rhotraj;

namespace {

PlannerSettings quick() {
    PlannerSettings settings;
    settings.bcd_max_iter = 4;
    return settings;
}

void check_non_decreasing(const std::vector<double>& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i] >= trace[i - 1] * (1.0 - 1e-8));
    }
}

} // namespace

TEST_CASE("conventional solve: feasible, closed, monotone") {
    const Scenario s = testing::random_scenario(31, 2, 60.0);
    const SolveReport r = solve_conventional(s, 30.0, quick());
    CHECK(r.method == "conventional");
    CHECK(r.plan.size() == 60);
    CHECK(check_feasibility(r.plan, s.uav).pass);
    CHECK((r.plan.q.col(r.plan.size() - 1) - r.plan.q.col(0)).norm() < 1e-6);
    CHECK((r.plan.v.col(r.plan.size() - 1) - r.plan.v.col(0)).norm() < 1e-6);
    REQUIRE(r.windows.size() == 1);
    check_non_decreasing(r.windows[0].ee_trace);
    CHECK(r.windows[0].ee_trace.back() > r.windows[0].ee_trace.front());
    CHECK(r.ee_bpj == doctest::Approx(r.per_node_bits.minCoeff() / r.energy.total_j).epsilon(1e-12));
    CHECK(is_valid_schedule(r.schedule));
}

TEST_CASE("receding-horizon solve stitches windows") {
    const Scenario s = testing::random_scenario(32, 2, 80.0);
    const RhoConfig cfg{30.0, 60.0, 40.0, 20.0};
    const SolveReport r = solve_rho(s, cfg, quick());
    CHECK(r.windows.size() == 3);
    CHECK(r.plan.size() == 80);
    const FeasibilityReport f = check_feasibility(r.plan, s.uav);
    CHECK(f.pass);
    CHECK(f.max_dynamics_residual < 1e-9);
    for (const WindowRecord& w : r.windows) check_non_decreasing(w.ee_trace);
    CHECK(r.windows.back().n2 == 0);
    // terminal window returns to the first committed state
    CHECK((r.plan.q.col(r.plan.size() - 1) - r.anchor_q).norm() < 1e-6);
    CHECK((r.anchor_q - r.plan.q.col(0)).norm() < 1e-9);
}

TEST_CASE("a single full-length window reduces to the conventional solve") {
    const Scenario s = testing::random_scenario(33, 2, 40.0);
    const RhoConfig cfg{30.0, 60.0, 40.0, 40.0};
    const SolveReport rho = solve_rho(s, cfg, quick());
    const SolveReport conv = solve_conventional(s, 30.0, quick());
    CHECK(rho.ee_bpj == doctest::Approx(conv.ee_bpj).epsilon(1e-10));
}
