#ifndef RHOTRAJ_ENERGY_HPP
#define RHOTRAJ_ENERGY_HPP

#include "rhotraj/kinematics.hpp"
#include "rhotraj/scenario.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace rhotraj {

/// Fixed-wing propulsion power c1 |v|^3 + (c2 / |v|)(1 + |a|^2 / g^2), watts.
template <typename Derived1, typename Derived2>
typename Derived1::Scalar instantaneous_power(const Eigen::MatrixBase<Derived1>& v, const Eigen::MatrixBase<Derived2>& a,
                                              const UavParams& uav) {
    using Scalar = typename Derived1::Scalar;
    const Scalar speed = v.norm();
    if (!(speed > Scalar(0))) {
        throw std::domain_error("instantaneous_power: zero speed");
    }
    const Scalar g2 = Scalar(uav.gravity * uav.gravity);
    return Scalar(uav.c1) * speed * speed * speed + Scalar(uav.c2) / speed * (Scalar(1) + a.squaredNorm() / g2);
}

/// Level-flight power at speed `speed` with zero acceleration.
inline double level_power(double speed, const UavParams& uav) {
    return uav.c1 * speed * speed * speed + uav.c2 / speed;
}

/// Speed minimizing level-flight propulsion power, (c2 / (3 c1))^(1/4).
inline double min_power_speed(const UavParams& uav) { return std::pow(uav.c2 / (3.0 * uav.c1), 0.25); }

struct EnergyBreakdown {
    double propulsion_j = 0.0;    // fine slots
    double coarse_tail_j = 0.0;   // coarse slots
    double kinetic_delta_j = 0.0;
    double carry_j = 0.0;
    double total_j = 0.0;
};

/// Energy of `plan` on its own grid plus `carry_j`. The kinetic term uses
/// the first and last sampled velocities.
EnergyBreakdown plan_energy(const TrajectoryPlan& plan, const UavParams& uav, double carry_j = 0.0);

} // namespace rhotraj

#endif
