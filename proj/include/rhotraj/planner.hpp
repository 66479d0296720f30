#ifndef RHOTRAJ_PLANNER_HPP
#define RHOTRAJ_PLANNER_HPP

#include "rhotraj/comms.hpp"
#include "rhotraj/conic.hpp"
#include "rhotraj/energy.hpp"
#include "rhotraj/kinematics.hpp"
#include "rhotraj/scenario.hpp"
#include "rhotraj/subproblems.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace rhotraj {

struct PlannerSettings {
    conic::Settings solver;
    double bcd_rel_tol = 1e-4;     // stop when one outer iteration gains less than this, relative
    int bcd_max_iter = 30;
    int dinkelbach_max_iter = 5;   // per outer iteration
    double dinkelbach_tol = 1e-6;  // relative to lambda * energy
    double trust_radius_factor = 10.0;  // initial trust radius in units of delta1
    int max_trust_halvings = 20;
};

/// Objective value of a plan: min_l (carry_l + bits_l) / (carry_e + energy).
struct Efficiency {
    Eigen::VectorXd per_node_bits;
    double min_bits = 0.0;
    double energy_j = 0.0;
    double ee = 0.0;
};

Efficiency evaluate(const TrajectoryPlan& plan, const Schedule& schedule, const WindowState& state,
                    const Scenario& scenario);

struct BcdResult {
    TrajectoryPlan plan;
    Schedule schedule;
    double eta_bits = 0.0;  // min-node bits including carry
    double energy_j = 0.0;  // including carry
    std::vector<double> ee_trace;
    int iterations = 0;     // outer iterations
    int subproblems = 0;    // conic solves
};

/// Alternates the schedule LP with Dinkelbach/SCA trajectory updates from a
/// feasible `init`. Each accepted update does not decrease the window EE.
BcdResult bcd_solve(const TrajectoryPlan& init, const WindowState& state, const Scenario& scenario,
                    const PlannerSettings& settings, int window = 1);

struct WindowRecord {
    int k = 0;
    int n1 = 0;
    int n2 = 0;
    int iters = 0;
    int subproblems = 0;
    std::vector<double> ee_trace;
    double wall_s = 0.0;
};

struct SolveReport {
    std::string method;
    double ee_bpj = 0.0;
    Eigen::VectorXd per_node_bits;
    EnergyBreakdown energy;
    std::vector<WindowRecord> windows;
    TrajectoryPlan plan;
    Schedule schedule;
    Vec2 anchor_q = Vec2::Zero();
    Vec2 anchor_v = Vec2::Zero();
    double wall_s = 0.0;
    double delta1_m = 0.0;
    std::optional<RhoConfig> rho;
};

/// One BCD solve over the uniform grid with periodic closure.
SolveReport solve_conventional(const Scenario& scenario, double delta1_m, const PlannerSettings& settings = {});

/// Receding-horizon solve: one BCD per window, committing execute_s of each.
SolveReport solve_rho(const Scenario& scenario, const RhoConfig& cfg, const PlannerSettings& settings = {});

} // namespace rhotraj

#endif
