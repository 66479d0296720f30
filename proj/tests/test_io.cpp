#include "rhotraj/io.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rhotraj;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("rhotraj_test_" + name); }

TrajectoryPlan two_resolution_plan() {
    Grid grid = build_window_grid(1, 600.0, RhoConfig{30.0, 120.0, 120.0, 80.0}, 30.0);
    Points2 a(2, grid.size());
    for (int n = 0; n < grid.size(); ++n) a.col(n) = Vec2(std::sin(0.1 * n), 0.3 / (1.0 + n));
    return propagate(Vec2(1.0 / 3.0, -2.0), Vec2(17.1, 3.3), a, grid);
}

} // namespace

TEST_CASE("trajectory CSV round-trips exactly") {
    const TrajectoryPlan plan = two_resolution_plan();
    const fs::path path = temp_file("traj.csv");
    write_trajectory_csv(plan, path);
    const TrajectoryPlan back = read_trajectory_csv(path);
    CHECK(back.q == plan.q);
    CHECK(back.v == plan.v);
    CHECK(back.a == plan.a);
    CHECK(back.grid.n_fine == plan.grid.n_fine);
    CHECK(back.grid.n_coarse == plan.grid.n_coarse);
    CHECK(back.grid.delta2_s == plan.grid.delta2_s);
    fs::remove(path);
}

TEST_CASE("schedule CSV round-trips exactly") {
    Schedule s{Eigen::MatrixXd::Random(7, 3).cwiseAbs() / 3.0};
    const fs::path path = temp_file("sched.csv");
    write_schedule_csv(s, path);
    CHECK(read_schedule_csv(path).rho == s.rho);
    std::stringstream text;
    write_schedule_csv(s, text);
    CHECK(text.str().rfind("slot,rho_1,rho_2,rho_3\n", 0) == 0);
    fs::remove(path);
}

TEST_CASE("malformed CSV names line and column") {
    const fs::path path = temp_file("bad.csv");
    {
        std::ofstream out(path);
        out << "t_s,dt_s,qx_m,qy_m,vx_mps,vy_mps,ax_mps2,ay_mps2\n0,1,0,0,20,0,0,0\n1,1,20,0,abc,0,0,0\n";
    }
    try {
        read_trajectory_csv(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 3") != std::string::npos);
        CHECK(what.find("vx_mps") != std::string::npos);
    }
    {
        std::ofstream out(path);
        out << "t_s,dt_s,qx_m,qy_m,speed,vy_mps,ax_mps2,ay_mps2\n";
    }
    CHECK_THROWS_WITH_AS(read_trajectory_csv(path), doctest::Contains("vx_mps"), ParseError);
    {
        std::ofstream out(path);
        out << "slot,rho_1\n0,0.5,0.5\n";
    }
    CHECK_THROWS_AS(read_schedule_csv(path), ParseError);
    fs::remove(path);
    CHECK_THROWS_AS(read_schedule_csv(path), fs::filesystem_error);
}

TEST_CASE("report JSON layout") {
    const Scenario s = testing::random_scenario(41, 2, 30.0);
    PlannerSettings settings;
    settings.bcd_max_iter = 1;
    const SolveReport r = solve_conventional(s, 30.0, settings);
    const auto doc = nlohmann::json::parse(report_json(r, s, settings));
    for (const char* key : {"method", "ee_bpj", "per_node_bits", "energy", "windows", "closure", "config_echo", "timing"}) {
        CHECK(doc.contains(key));
    }
    CHECK(doc["windows"][0].contains("ee_trace"));
    CHECK_FALSE(doc["windows"][0].contains("wall_s"));
    CHECK(doc["timing"]["windows"][0].contains("wall_s"));
    CHECK(doc["config_echo"]["settings"]["tol_feas"] == 1e-8);
    CHECK(doc["per_node_bits"].size() == 2);

    // everything outside "timing" is reproducible
    const SolveReport again = solve_conventional(s, 30.0, settings);
    auto strip = [&](const SolveReport& rep) {
        auto d = nlohmann::json::parse(report_json(rep, s, settings));
        d.erase("timing");
        return d.dump();
    };
    CHECK(strip(r) == strip(again));
}

TEST_CASE("bench rows") {
    std::stringstream out;
    write_bench_row(BenchRow{120.0, "rho", 20.0, 40.0, 1.5, 2e4, 7, ""}, out);
    write_bench_row(BenchRow{480.0, "conventional", 0.0, 0.0, 3.0, 0.0, 0, "infeasible"}, out);
    CHECK(out.str() == "120,rho,20,40,1.5,20000,7\n480,conventional,0,0,3,nan,0\n");
    CHECK(std::string(bench_header) == "t_s,method,te_s,window_s,wall_s,ee_bpj,iters");
}
