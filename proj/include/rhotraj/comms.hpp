#ifndef RHOTRAJ_COMMS_HPP
#define RHOTRAJ_COMMS_HPP

#include "rhotraj/kinematics.hpp"
#include "rhotraj/scenario.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rhotraj {

/// Per-slot time shares: rho(n, l) is the fraction of slot n given to node l.
struct Schedule {
    Eigen::MatrixXd rho;

    int slots() const { return static_cast<int>(rho.rows()); }
    int nodes() const { return static_cast<int>(rho.cols()); }
};

/// True when rho >= -tol and every row sums to at most 1 + tol.
bool is_valid_schedule(const Schedule& schedule, double tol = 1e-9);

struct ThroughputReport {
    Eigen::VectorXd per_node_bits;
    double min_bits = 0.0;
    int binding_node = 0;
};

/// B log2(1 + snr / x^alpha) for squared UAV-node distance x (altitude included).
template <typename Scalar>
Scalar rate_at_squared_distance(Scalar x, double snr, double alpha, double bandwidth_hz) {
    using std::log;
    using std::pow;
    return Scalar(bandwidth_hz) * log(Scalar(1) + Scalar(snr) / pow(x, Scalar(alpha))) / Scalar(std::numbers::ln2);
}

/// Expected-rate bound for node `node` with the UAV at horizontal position `q`, bps.
template <typename Derived>
typename Derived::Scalar slot_rate(const Eigen::MatrixBase<Derived>& q, const GroundNode& node, const Scenario& scenario) {
    using Scalar = typename Derived::Scalar;
    const Scalar h2 = Scalar(scenario.uav.altitude_m * scenario.uav.altitude_m);
    const Scalar x = h2 + (q - node.position.cast<Scalar>()).squaredNorm();
    return rate_at_squared_distance(x, reference_snr(node, scenario.channel), scenario.channel.alpha(),
                                    scenario.channel.bandwidth_hz);
}

/// rates(n, l) = slot_rate(q[n], node l).
Eigen::MatrixXd rate_matrix(const TrajectoryPlan& plan, const Scenario& scenario);

/// carry[l] + sum_n dt_n rho(n, l) rate(n, l). An empty `carry` means zeros.
ThroughputReport throughput(const TrajectoryPlan& plan, const Schedule& schedule, const Scenario& scenario,
                            const Eigen::VectorXd& carry = {});

/// Same accounting from a precomputed rate matrix.
ThroughputReport throughput(const Grid& grid, const Eigen::MatrixXd& rates, const Schedule& schedule,
                            const Eigen::VectorXd& carry = {});

struct FadingModel {
    enum class Kind { none, rayleigh, rician };
    Kind kind = Kind::rayleigh;
    double k_factor = 0.0;  // rician only, linear

    static FadingModel rayleigh() { return {Kind::rayleigh, 0.0}; }
    static FadingModel degenerate() { return {Kind::none, 0.0}; }
    static FadingModel rician(double k) { return {Kind::rician, k}; }
};

struct MonteCarloResult {
    Eigen::VectorXd mean_bits;
    Eigen::VectorXd stderr_bits;
    long samples = 0;
};

/// Empirical per-node throughput under unit-mean small-scale fading drawn
/// independently per slot and sample. Reproducible for a given seed.
MonteCarloResult monte_carlo_throughput(const TrajectoryPlan& plan, const Schedule& schedule, const Scenario& scenario,
                                        long n_samples, std::uint64_t seed,
                                        const FadingModel& fading = FadingModel::rayleigh());

} // namespace rhotraj

#endif
