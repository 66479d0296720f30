#ifndef RHOTRAJ_IO_HPP
#define RHOTRAJ_IO_HPP

#include "rhotraj/comms.hpp"
#include "rhotraj/kinematics.hpp"
#include "rhotraj/planner.hpp"
#include "rhotraj/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace rhotraj {

// trajectory.csv: t_s,dt_s,qx_m,qy_m,vx_mps,vy_mps,ax_mps2,ay_mps2
void write_trajectory_csv(const TrajectoryPlan& plan, std::ostream& out);
void write_trajectory_csv(const TrajectoryPlan& plan, const std::filesystem::path& path);
/// Slots whose duration equals the first slot's are fine, the rest coarse.
TrajectoryPlan read_trajectory_csv(const std::filesystem::path& path);

// schedule.csv: slot,rho_1,...,rho_L
void write_schedule_csv(const Schedule& schedule, std::ostream& out);
void write_schedule_csv(const Schedule& schedule, const std::filesystem::path& path);
Schedule read_schedule_csv(const std::filesystem::path& path);

/// Report as JSON text. Wall-clock values appear only under "timing".
std::string report_json(const SolveReport& report, const Scenario& scenario, const PlannerSettings& settings);

struct BenchRow {
    double t_s = 0.0;
    std::string method;
    double te_s = 0.0;      // 0 for the conventional method
    double window_s = 0.0;  // 0 for the conventional method
    double wall_s = 0.0;
    double ee_bpj = 0.0;
    int iters = 0;
    std::string error;      // non-empty when the cell failed
};

inline constexpr const char* bench_header = "t_s,method,te_s,window_s,wall_s,ee_bpj,iters";
void write_bench_row(const BenchRow& row, std::ostream& out);

} // namespace rhotraj

#endif
