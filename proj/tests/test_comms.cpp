#include "rhotraj/comms.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rhotraj;

namespace {

TrajectoryPlan hover_line(int slots) {
    const Grid grid = build_uniform_grid(slots, 30.0, 30.0);
    return propagate(Vec2(-100.0, 50.0), Vec2(20.0, 0.0), Points2::Zero(2, grid.size()), grid);
}

Schedule round_robin(int slots, int nodes) {
    Schedule s{Eigen::MatrixXd::Zero(slots, nodes)};
    for (int n = 0; n < slots; ++n) s.rho(n, n % nodes) = 1.0;
    return s;
}

} // namespace

TEST_CASE("rate at a hand-computed point") {
    const Scenario s = testing::random_scenario(1, 1);
    const double snr = reference_snr(s.nodes[0], s.channel);
    const Vec2 q = s.nodes[0].position + Vec2(300.0, 400.0);
    // distance^2 = 100^2 + 500^2, alpha = 1
    const double expected = 1e6 * std::log2(1.0 + snr / 260000.0);
    CHECK(slot_rate(q, s.nodes[0], s) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("throughput accumulates shares and carry") {
    const Scenario s = testing::random_scenario(2, 2);
    const TrajectoryPlan plan = hover_line(10);
    const Schedule sched = round_robin(plan.size(), 2);
    Eigen::VectorXd carry(2);
    carry << 5.0, 7.0;
    const ThroughputReport r = throughput(plan, sched, s, carry);
    Eigen::VectorXd expected = carry;
    for (int n = 0; n < plan.size(); ++n) {
        expected(n % 2) += plan.grid.dt(n) * slot_rate(plan.q.col(n), s.nodes[static_cast<std::size_t>(n % 2)], s);
    }
    CHECK((r.per_node_bits - expected).norm() <= 1e-9 * expected.norm());
    CHECK(r.min_bits == expected.minCoeff());
    CHECK(is_valid_schedule(sched));
    Schedule bad = sched;
    bad.rho(0, 1) = 0.5;
    CHECK_FALSE(is_valid_schedule(bad));
}

TEST_CASE("monte carlo: no fading reproduces the deterministic throughput") {
    const Scenario s = testing::random_scenario(3, 2);
    const TrajectoryPlan plan = hover_line(8);
    const Schedule sched = round_robin(plan.size(), 2);
    const MonteCarloResult mc = monte_carlo_throughput(plan, sched, s, 10, 1, FadingModel::degenerate());
    const ThroughputReport det = throughput(plan, sched, s);
    CHECK((mc.mean_bits - det.per_node_bits).norm() <= 1e-9 * det.per_node_bits.norm());
    CHECK(mc.stderr_bits.maxCoeff() <= 1e-6 * det.per_node_bits.maxCoeff());
}

TEST_CASE("monte carlo: seeded runs repeat exactly") {
    const Scenario s = testing::random_scenario(3, 2);
    const TrajectoryPlan plan = hover_line(8);
    const Schedule sched = round_robin(plan.size(), 2);
    const MonteCarloResult a = monte_carlo_throughput(plan, sched, s, 500, 42);
    const MonteCarloResult b = monte_carlo_throughput(plan, sched, s, 500, 42);
    const MonteCarloResult c = monte_carlo_throughput(plan, sched, s, 500, 43);
    CHECK(a.mean_bits == b.mean_bits);
    CHECK(a.mean_bits != c.mean_bits);
}

TEST_CASE("monte carlo: Rayleigh mean matches numerical integration") {
    // single slot, single node: E[B log2(1 + g snr)] with g ~ Exp(1)
    const Scenario s = testing::random_scenario(5, 1);
    const Grid grid = build_uniform_grid(1.0, 30.0, 30.0);
    const TrajectoryPlan plan = propagate(s.nodes[0].position + Vec2(200.0, 0.0), Vec2(20.0, 0.0), Points2::Zero(2, 1), grid);
    const Schedule sched{Eigen::MatrixXd::Ones(1, 1)};
    const double snr = reference_snr(s.nodes[0], s.channel) / (100.0 * 100.0 + 200.0 * 200.0);

    // Simpson over the exponential density, truncated where e^-g is negligible
    const int steps = 200000;
    const double upper = 50.0;
    const double h = upper / steps;
    double integral = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double g = i * h;
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        integral += w * std::log2(1.0 + g * snr) * std::exp(-g);
    }
    const double expected = s.channel.bandwidth_hz * plan.grid.dt(0) * integral * h / 3.0;

    const MonteCarloResult mc = monte_carlo_throughput(plan, sched, s, 200000, 9);
    CHECK(std::abs(mc.mean_bits(0) - expected) < 4.0 * mc.stderr_bits(0));
    CHECK(mc.mean_bits(0) < throughput(plan, sched, s).per_node_bits(0));
}
