#include "rhotraj/energy.hpp"

namespace rhotraj {

EnergyBreakdown plan_energy(const TrajectoryPlan& plan, const UavParams& uav, double carry_j) {
    EnergyBreakdown out;
    out.carry_j = carry_j;
    const int n_slots = plan.size();
    for (int n = 0; n < n_slots; ++n) {
        const double e = plan.grid.dt(n) * instantaneous_power(plan.v.col(n), plan.a.col(n), uav);
        (plan.grid.is_fine(n) ? out.propulsion_j : out.coarse_tail_j) += e;
    }
    if (n_slots > 0) {
        out.kinetic_delta_j = 0.5 * uav.mass_kg * (plan.v.col(n_slots - 1).squaredNorm() - plan.v.col(0).squaredNorm());
    }
    out.total_j = out.carry_j + out.propulsion_j + out.coarse_tail_j + out.kinetic_delta_j;
    return out;
}

} // namespace rhotraj
