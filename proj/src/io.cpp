#include "rhotraj/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rhotraj {

namespace {

using nlohmann::ordered_json;

std::string fmt17(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(trim(cell));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::filesystem::filesystem_error("cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
    }
    Table table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line);
        if (table.header.empty()) {
            table.header = cells;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " columns, got " + std::to_string(cells.size()));
        }
        std::vector<double> values;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cells[c], &used));
                if (used != cells[c].size()) {
                    throw std::invalid_argument("trailing characters");
                }
            } catch (const std::exception&) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": column '" + table.header[c] +
                                 "' is not a number");
            }
        }
        table.rows.push_back(std::move(values));
    }
    if (table.header.empty()) {
        throw ParseError(path.string() + ": empty file");
    }
    return table;
}

void expect_header(const Table& table, const std::vector<std::string>& expected, const std::filesystem::path& path) {
    for (std::size_t c = 0; c < expected.size(); ++c) {
        if (c >= table.header.size() || table.header[c] != expected[c]) {
            throw ParseError(path.string() + ": missing column '" + expected[c] + "'");
        }
    }
}

template <typename Writer, typename T>
void write_file(const T& value, const std::filesystem::path& path, Writer writer) {
    std::ofstream out(path);
    if (!out) {
        throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::permission_denied));
    }
    writer(value, out);
}

ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v(i));
    }
    return arr;
}

} // namespace

void write_trajectory_csv(const TrajectoryPlan& plan, std::ostream& out) {
    out << "t_s,dt_s,qx_m,qy_m,vx_mps,vy_mps,ax_mps2,ay_mps2\n";
    for (int n = 0; n < plan.size(); ++n) {
        out << fmt17(plan.grid.start(n)) << ',' << fmt17(plan.grid.dt(n)) << ',' << fmt17(plan.q(0, n)) << ','
            << fmt17(plan.q(1, n)) << ',' << fmt17(plan.v(0, n)) << ',' << fmt17(plan.v(1, n)) << ','
            << fmt17(plan.a(0, n)) << ',' << fmt17(plan.a(1, n)) << '\n';
    }
}

void write_trajectory_csv(const TrajectoryPlan& plan, const std::filesystem::path& path) {
    write_file(plan, path, [](const TrajectoryPlan& p, std::ostream& o) { write_trajectory_csv(p, o); });
}

TrajectoryPlan read_trajectory_csv(const std::filesystem::path& path) {
    const Table table = read_table(path);
    expect_header(table, {"t_s", "dt_s", "qx_m", "qy_m", "vx_mps", "vy_mps", "ax_mps2", "ay_mps2"}, path);
    const auto n_slots = static_cast<Eigen::Index>(table.rows.size());
    TrajectoryPlan plan;
    plan.q.resize(2, n_slots);
    plan.v.resize(2, n_slots);
    plan.a.resize(2, n_slots);
    for (Eigen::Index n = 0; n < n_slots; ++n) {
        const auto& r = table.rows[static_cast<std::size_t>(n)];
        plan.grid.slots.push_back({r[0], r[1]});
        plan.q.col(n) << r[2], r[3];
        plan.v.col(n) << r[4], r[5];
        plan.a.col(n) << r[6], r[7];
    }
    if (n_slots > 0) {
        plan.grid.delta1_s = plan.grid.slots.front().duration_s;
        plan.grid.delta2_s = plan.grid.delta1_s;
        for (const Slot& slot : plan.grid.slots) {
            if (std::abs(slot.duration_s - plan.grid.delta1_s) <= 1e-9 * plan.grid.delta1_s) {
                ++plan.grid.n_fine;
            } else {
                ++plan.grid.n_coarse;
                plan.grid.delta2_s = slot.duration_s;
            }
        }
    }
    return plan;
}

void write_schedule_csv(const Schedule& schedule, std::ostream& out) {
    out << "slot";
    for (int l = 0; l < schedule.nodes(); ++l) {
        out << ",rho_" << l + 1;
    }
    out << '\n';
    for (int n = 0; n < schedule.slots(); ++n) {
        out << n;
        for (int l = 0; l < schedule.nodes(); ++l) {
            out << ',' << fmt17(schedule.rho(n, l));
        }
        out << '\n';
    }
}

void write_schedule_csv(const Schedule& schedule, const std::filesystem::path& path) {
    write_file(schedule, path, [](const Schedule& s, std::ostream& o) { write_schedule_csv(s, o); });
}

Schedule read_schedule_csv(const std::filesystem::path& path) {
    const Table table = read_table(path);
    std::vector<std::string> expected{"slot"};
    for (std::size_t l = 1; l < table.header.size(); ++l) {
        expected.push_back("rho_" + std::to_string(l));
    }
    expect_header(table, expected, path);
    if (table.header.size() < 2) {
        throw ParseError(path.string() + ": missing column 'rho_1'");
    }
    Schedule schedule;
    schedule.rho.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size() - 1));
    for (std::size_t n = 0; n < table.rows.size(); ++n) {
        for (std::size_t l = 1; l < table.header.size(); ++l) {
            schedule.rho(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l - 1)) = table.rows[n][l];
        }
    }
    return schedule;
}

std::string report_json(const SolveReport& report, const Scenario& scenario, const PlannerSettings& settings) {
    ordered_json doc;
    doc["method"] = report.method;
    doc["ee_bpj"] = report.ee_bpj;
    doc["per_node_bits"] = vector_json(report.per_node_bits);
    doc["energy"] = {{"propulsion_j", report.energy.propulsion_j},
                     {"coarse_tail_j", report.energy.coarse_tail_j},
                     {"kinetic_delta_j", report.energy.kinetic_delta_j},
                     {"total_j", report.energy.total_j}};
    ordered_json windows = ordered_json::array();
    ordered_json timing_windows = ordered_json::array();
    for (const WindowRecord& w : report.windows) {
        windows.push_back({{"k", w.k},
                           {"n1", w.n1},
                           {"n2", w.n2},
                           {"iters", w.iters},
                           {"subproblems", w.subproblems},
                           {"ee_trace", w.ee_trace}});
        timing_windows.push_back({{"k", w.k}, {"wall_s", w.wall_s}});
    }
    doc["windows"] = windows;
    doc["closure"] = {{"anchor_q_m", {report.anchor_q(0), report.anchor_q(1)}},
                      {"anchor_v_mps", {report.anchor_v(0), report.anchor_v(1)}}};

    ordered_json echo = ordered_json::parse(dump_scenario(scenario));
    ordered_json method = {{"delta1_m", report.delta1_m}};
    if (report.rho) {
        method["delta2_m"] = report.rho->delta2_m;
        method["window_s"] = report.rho->window_s;
        method["execute_s"] = report.rho->execute_s;
    }
    echo["method"] = method;
    echo["settings"] = {{"tol_feas", settings.solver.feas_tol},
                        {"tol_opt", settings.solver.opt_tol},
                        {"bcd_rel_tol", settings.bcd_rel_tol},
                        {"bcd_max_iter", settings.bcd_max_iter},
                        {"dinkelbach_max_iter", settings.dinkelbach_max_iter},
                        {"dinkelbach_tol", settings.dinkelbach_tol},
                        {"trust_radius_factor", settings.trust_radius_factor}};
    doc["config_echo"] = echo;
    doc["timing"] = {{"total_s", report.wall_s}, {"windows", timing_windows}};
    return doc.dump(2) + "\n";
}

void write_bench_row(const BenchRow& row, std::ostream& out) {
    out << row.t_s << ',' << row.method << ',' << row.te_s << ',' << row.window_s << ',' << fmt17(row.wall_s) << ','
        << (row.error.empty() ? fmt17(row.ee_bpj) : std::string("nan")) << ',' << row.iters << '\n';
}

} // namespace rhotraj
