// rho_traj: command-line front end for the trajectory planners.
//
//   rho_traj solve --scenario s.json --method rho --out run1/
//   rho_traj validate --scenario s.json --trajectory run1/trajectory.csv --schedule run1/schedule.csv
//   rho_traj bench --scenario s.json --t-list 120,240,480 --reps 1 --out bench/
//   rho_traj montecarlo --scenario s.json --trajectory ... --schedule ... --samples 100000 --seed 1

#include "rhotraj/io.hpp"
#include "rhotraj/planner.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rhotraj;

namespace {

constexpr int exit_fail = 1;    // a check did not pass
constexpr int exit_input = 2;   // unreadable or invalid input
constexpr int exit_infeasible = 3;

struct Options {
    std::string scenario;
    std::string method;
    std::string out;
    std::uint64_t seed = 1;
    std::optional<double> tol_feas;
    std::optional<double> tol_opt;
    std::optional<double> te;
    std::optional<double> window;
    std::optional<double> delta1;
    std::optional<double> delta2;
    std::string t_list = "120,240,480";
    int reps = 1;
    long samples = 100000;
    std::string trajectory;
    std::string schedule;
    std::string fading = "rayleigh";
};

int fail_json(int code, ordered_json body) {
    std::cout << body.dump() << '\n';
    return code;
}

/// Runs `body`, mapping library exceptions to error JSON and exit codes.
template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const fs::filesystem_error& e) {
        const bool scenario = std::string(e.what()).find("scenario") != std::string::npos;
        return fail_json(exit_input, {{"error", scenario ? "scenario_not_found" : "file_not_found"},
                                      {"path", e.path1().string()}});
    } catch (const ParseError& e) {
        return fail_json(exit_input, {{"error", "parse_error"}, {"message", e.what()}});
    } catch (const InvariantError& e) {
        return fail_json(exit_input, {{"error", "invalid_parameter"}, {"field", e.field()}, {"message", e.what()}});
    } catch (const InfeasibleError& e) {
        return fail_json(exit_infeasible, {{"error", "infeasible"}, {"window", e.window()}, {"message", e.what()}});
    }
}

PlannerSettings planner_settings(const Options& opt) {
    PlannerSettings settings;
    if (opt.tol_feas) settings.solver.feas_tol = *opt.tol_feas;
    if (opt.tol_opt) settings.solver.opt_tol = *opt.tol_opt;
    if (!(settings.solver.feas_tol > 0.0)) throw InvariantError("tol_feas", "must be positive");
    if (!(settings.solver.opt_tol > 0.0)) throw InvariantError("tol_opt", "must be positive");
    return settings;
}

RhoConfig rho_config(const Options& opt, const Scenario& scenario) {
    RhoConfig cfg = scenario.rho.value_or(RhoConfig{});
    if (opt.delta1) cfg.delta1_m = *opt.delta1;
    if (opt.delta2) cfg.delta2_m = *opt.delta2;
    if (opt.window) cfg.window_s = *opt.window;
    if (opt.te) cfg.execute_s = *opt.te;
    return cfg;
}

SolveReport run(const std::string& method, const Scenario& scenario, const RhoConfig& cfg,
                const PlannerSettings& settings) {
    if (method == "conventional") {
        return solve_conventional(scenario, cfg.delta1_m, settings);
    }
    if (method == "rho") {
        return solve_rho(scenario, cfg, settings);
    }
    throw InvariantError("method", "expected 'conventional' or 'rho', got '" + method + "'");
}

fs::path prepare_out(const std::string& out) {
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    fs::create_directories(dir);
    return dir;
}

int cmd_solve(const Options& opt) {
    const Scenario scenario = load_scenario(opt.scenario);
    const PlannerSettings settings = planner_settings(opt);
    const RhoConfig cfg = rho_config(opt, scenario);
    const SolveReport report = run(opt.method, scenario, cfg, settings);

    const fs::path dir = prepare_out(opt.out);
    write_trajectory_csv(report.plan, dir / "trajectory.csv");
    write_schedule_csv(report.schedule, dir / "schedule.csv");
    std::ofstream(dir / "report.json") << report_json(report, scenario, settings);

    std::cout << "method " << report.method << "  ee " << report.ee_bpj << " bits/J  min throughput "
              << report.per_node_bits.minCoeff() << " bits  energy " << report.energy.total_j << " J\n";
    return 0;
}

struct Check {
    std::string name;
    bool pass = true;
    std::string detail;
};

int cmd_validate(const Options& opt) {
    const Scenario scenario = load_scenario(opt.scenario);
    const TrajectoryPlan plan = read_trajectory_csv(opt.trajectory);
    const Schedule schedule = read_schedule_csv(opt.schedule);
    if (plan.size() == 0) {
        throw ParseError(opt.trajectory + ": no slots");
    }

    std::vector<Check> checks;
    const FeasibilityReport feas = check_feasibility(plan, scenario.uav);
    for (ViolationKind kind : {ViolationKind::speed_low, ViolationKind::speed_high, ViolationKind::acceleration,
                               ViolationKind::dynamics_position, ViolationKind::dynamics_velocity}) {
        Check c{to_string(kind)};
        int count = 0;
        for (const Violation& v : feas.violations) {
            if (v.kind != kind) continue;
            if (count++ == 0) {
                std::ostringstream os;
                os << "slot " << v.slot << ": " << v.value << " vs " << v.limit;
                c.detail = os.str();
            }
        }
        c.pass = count == 0;
        if (count > 1) c.detail += " (+" + std::to_string(count - 1) + " more)";
        checks.push_back(c);
    }

    Check shape{"schedule_shape"};
    if (schedule.slots() != plan.size() || schedule.nodes() != static_cast<int>(scenario.node_count())) {
        shape.pass = false;
        shape.detail = std::to_string(schedule.slots()) + "x" + std::to_string(schedule.nodes()) + ", expected " +
                       std::to_string(plan.size()) + "x" + std::to_string(scenario.node_count());
    }
    checks.push_back(shape);

    Check simplex{"schedule_simplex"};
    for (int n = 0; n < schedule.slots() && simplex.pass; ++n) {
        const auto row = schedule.rho.row(n);
        if (row.minCoeff() < -1e-9 || row.maxCoeff() > 1.0 + 1e-9 || row.sum() > 1.0 + 1e-9) {
            simplex.pass = false;
            std::ostringstream os;
            os << "slot " << n << ": sum " << row.sum() << ", min " << row.minCoeff();
            simplex.detail = os.str();
        }
    }
    checks.push_back(simplex);

    // the last slot starts where the first does
    Check closure{"periodic_closure"};
    const double delta1_m = opt.delta1.value_or(plan.grid.delta1_s * scenario.uav.v_max);
    const double gap = (plan.q.col(plan.size() - 1) - plan.q.col(0)).norm();
    closure.pass = gap <= delta1_m;
    std::ostringstream os;
    os << "|q_end - q_0| = " << gap << " m, limit " << delta1_m << " m";
    closure.detail = os.str();
    checks.push_back(closure);

    bool all = true;
    for (const Check& c : checks) {
        all = all && c.pass;
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << "  " << c.detail;
        std::cout << '\n';
    }
    return all ? 0 : exit_fail;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParseError("--t-list: '" + item + "' is not a number");
        }
    }
    if (values.empty()) throw ParseError("--t-list: empty");
    return values;
}

int cmd_bench(const Options& opt) {
    const Scenario base = load_scenario(opt.scenario);
    const PlannerSettings settings = planner_settings(opt);
    const RhoConfig cfg = rho_config(opt, base);
    const std::vector<double> periods = parse_list(opt.t_list);
    std::vector<std::string> methods{"conventional", "rho"};
    if (!opt.method.empty() && opt.method != "all") methods = {opt.method};

    std::ofstream file;
    if (!opt.out.empty()) file.open(prepare_out(opt.out) / "bench.csv");
    std::ostream& out = opt.out.empty() ? std::cout : file;
    out << bench_header << '\n';
    for (double t : periods) {
        Scenario scenario = base;
        scenario.period_s = t;
        for (const std::string& method : methods) {
            for (int rep = 0; rep < opt.reps; ++rep) {
                BenchRow row;
                row.t_s = t;
                row.method = method;
                if (method == "rho") {
                    row.te_s = cfg.execute_s;
                    row.window_s = cfg.window_s;
                }
                try {
                    const SolveReport report = run(method, scenario, cfg, settings);
                    row.wall_s = report.wall_s;
                    row.ee_bpj = report.ee_bpj;
                    for (const WindowRecord& w : report.windows) row.iters += w.iters;
                } catch (const std::exception& e) {
                    row.error = e.what();
                    spdlog::warn("bench T={} {}: {}", t, method, e.what());
                }
                write_bench_row(row, out);
                out.flush();
            }
        }
    }
    return 0;
}

FadingModel parse_fading(const std::string& text) {
    if (text == "rayleigh") return FadingModel::rayleigh();
    if (text == "none") return FadingModel::degenerate();
    if (text.rfind("rician:", 0) == 0) {
        try {
            return FadingModel::rician(std::stod(text.substr(7)));
        } catch (const std::exception&) {
        }
    }
    throw InvariantError("fading", "expected rayleigh, none or rician:<K>, got '" + text + "'");
}

int cmd_montecarlo(const Options& opt) {
    const Scenario scenario = load_scenario(opt.scenario);
    const TrajectoryPlan plan = read_trajectory_csv(opt.trajectory);
    const Schedule schedule = read_schedule_csv(opt.schedule);
    if (schedule.slots() != plan.size() || schedule.nodes() != static_cast<int>(scenario.node_count())) {
        throw ParseError(opt.schedule + ": schedule shape does not match trajectory and scenario");
    }
    if (opt.samples < 2) throw InvariantError("samples", "need at least 2");
    const FadingModel fading = parse_fading(opt.fading);

    const ThroughputReport bound = throughput(plan, schedule, scenario);
    const MonteCarloResult mc = monte_carlo_throughput(plan, schedule, scenario, opt.samples, opt.seed, fading);

    ordered_json nodes = ordered_json::array();
    bool all = true;
    for (Eigen::Index l = 0; l < bound.per_node_bits.size(); ++l) {
        const bool pass = mc.mean_bits(l) <= bound.per_node_bits(l) + 3.0 * mc.stderr_bits(l);
        all = all && pass;
        nodes.push_back({{"node", l + 1},
                         {"bound_bits", bound.per_node_bits(l)},
                         {"empirical_bits", mc.mean_bits(l)},
                         {"stderr_bits", mc.stderr_bits(l)},
                         {"pass", pass}});
    }
    ordered_json doc;
    doc["samples"] = mc.samples;
    doc["seed"] = opt.seed;
    doc["fading"] = opt.fading;
    doc["nodes"] = nodes;
    doc["pass"] = all;
    const std::string text = doc.dump(2) + "\n";
    if (!opt.out.empty()) std::ofstream(prepare_out(opt.out) / "montecarlo.json") << text;
    std::cout << text;
    return all ? 0 : exit_fail;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("rho_traj");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("RHO_TRAJ_LOG")) {
        spdlog::set_level(spdlog::level::from_str(level));
    }
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"UAV trajectory and scheduling planner"};
    app.require_subcommand(1);
    Options opt;

    auto scenario_flag = [&](CLI::App* sub) { sub->add_option("--scenario", opt.scenario, "scenario JSON")->required(); };
    auto solver_flags = [&](CLI::App* sub) {
        sub->add_option("--tol-feas", opt.tol_feas, "conic feasibility tolerance");
        sub->add_option("--tol-opt", opt.tol_opt, "conic optimality tolerance");
        sub->add_option("--te", opt.te, "executed part of each window, s");
        sub->add_option("--window", opt.window, "window length, s");
        sub->add_option("--delta1", opt.delta1, "fine segment length, m");
        sub->add_option("--delta2", opt.delta2, "coarse segment length, m");
    };
    auto plan_files = [&](CLI::App* sub) {
        sub->add_option("--trajectory", opt.trajectory, "trajectory CSV")->required();
        sub->add_option("--schedule", opt.schedule, "schedule CSV")->required();
    };

    CLI::App* solve = app.add_subcommand("solve", "plan a trajectory and schedule");
    scenario_flag(solve);
    solve->add_option("--method", opt.method, "conventional or rho")->required();
    solve->add_option("--out", opt.out, "output directory");
    solve->add_option("--seed", opt.seed, "random seed (echoed only)");
    solver_flags(solve);

    CLI::App* validate = app.add_subcommand("validate", "check a plan against the constraints");
    scenario_flag(validate);
    plan_files(validate);
    validate->add_option("--delta1", opt.delta1, "closure tolerance, m (default: fine slot length)");

    CLI::App* bench = app.add_subcommand("bench", "wall-clock comparison over horizons");
    scenario_flag(bench);
    bench->add_option("--t-list", opt.t_list, "comma-separated horizons, s");
    bench->add_option("--method", opt.method, "conventional, rho or all");
    bench->add_option("--reps", opt.reps, "repetitions per cell")->check(CLI::PositiveNumber);
    bench->add_option("--out", opt.out, "output directory (default: CSV on stdout)");
    solver_flags(bench);

    CLI::App* montecarlo = app.add_subcommand("montecarlo", "check the expected-rate bound under fading");
    scenario_flag(montecarlo);
    plan_files(montecarlo);
    montecarlo->add_option("--samples", opt.samples, "fading realizations");
    montecarlo->add_option("--seed", opt.seed, "random seed");
    montecarlo->add_option("--fading", opt.fading, "rayleigh, none or rician:<K>");
    montecarlo->add_option("--out", opt.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_input;
    }

    if (solve->parsed()) return guarded([&] { return cmd_solve(opt); });
    if (validate->parsed()) return guarded([&] { return cmd_validate(opt); });
    if (bench->parsed()) return guarded([&] { return cmd_bench(opt); });
    return guarded([&] { return cmd_montecarlo(opt); });
}
