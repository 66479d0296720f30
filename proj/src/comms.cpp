#include "rhotraj/comms.hpp"

#include <random>
#include <stdexcept>
#include <vector>

namespace rhotraj {

bool is_valid_schedule(const Schedule& schedule, double tol) {
    if (schedule.rho.size() == 0) {
        return true;
    }
    return schedule.rho.minCoeff() >= -tol && schedule.rho.rowwise().sum().maxCoeff() <= 1.0 + tol;
}

Eigen::MatrixXd rate_matrix(const TrajectoryPlan& plan, const Scenario& scenario) {
    const auto n_nodes = static_cast<Eigen::Index>(scenario.nodes.size());
    Eigen::MatrixXd rates(plan.size(), n_nodes);
    for (Eigen::Index l = 0; l < n_nodes; ++l) {
        const GroundNode& node = scenario.nodes[static_cast<std::size_t>(l)];
        for (int n = 0; n < plan.size(); ++n) {
            rates(n, l) = slot_rate(plan.q.col(n), node, scenario);
        }
    }
    return rates;
}

ThroughputReport throughput(const Grid& grid, const Eigen::MatrixXd& rates, const Schedule& schedule,
                            const Eigen::VectorXd& carry) {
    if (rates.rows() != grid.size() || schedule.rho.rows() != rates.rows() || schedule.rho.cols() != rates.cols()) {
        throw std::invalid_argument("throughput: schedule is " + std::to_string(schedule.rho.rows()) + "x" +
                                    std::to_string(schedule.rho.cols()) + " but plan/rates are " +
                                    std::to_string(rates.rows()) + "x" + std::to_string(rates.cols()));
    }
    if (carry.size() != 0 && carry.size() != rates.cols()) {
        throw std::invalid_argument("throughput: carry has wrong length");
    }
    ThroughputReport report;
    report.per_node_bits = carry.size() == 0 ? Eigen::VectorXd::Zero(rates.cols()) : carry;
    for (Eigen::Index n = 0; n < rates.rows(); ++n) {
        const double dt = grid.dt(static_cast<int>(n));
        report.per_node_bits += dt * schedule.rho.row(n).cwiseProduct(rates.row(n)).transpose();
    }
    if (report.per_node_bits.size() > 0) {
        Eigen::Index idx = 0;
        report.min_bits = report.per_node_bits.minCoeff(&idx);
        report.binding_node = static_cast<int>(idx);
    }
    return report;
}

ThroughputReport throughput(const TrajectoryPlan& plan, const Schedule& schedule, const Scenario& scenario,
                            const Eigen::VectorXd& carry) {
    if (schedule.rho.rows() != plan.size() || schedule.rho.cols() != static_cast<Eigen::Index>(scenario.nodes.size())) {
        throw std::invalid_argument("throughput: schedule dimensions do not match plan and node count");
    }
    return throughput(plan.grid, rate_matrix(plan, scenario), schedule, carry);
}

MonteCarloResult monte_carlo_throughput(const TrajectoryPlan& plan, const Schedule& schedule, const Scenario& scenario,
                                        long n_samples, std::uint64_t seed, const FadingModel& fading) {
    const auto n_nodes = static_cast<Eigen::Index>(scenario.nodes.size());
    if (schedule.rho.rows() != plan.size() || schedule.rho.cols() != n_nodes) {
        throw std::invalid_argument("monte_carlo_throughput: schedule dimensions do not match plan");
    }
    if (n_samples < 2) {
        throw std::invalid_argument("monte_carlo_throughput: need at least two samples");
    }

    // per-(slot, node) mean SNR and weight B * dt * rho; zero-share entries are skipped
    struct Term {
        Eigen::Index node;
        double weight;
        double snr;
    };
    std::vector<Term> terms;
    const double h2 = scenario.uav.altitude_m * scenario.uav.altitude_m;
    const double alpha = scenario.channel.alpha();
    for (int n = 0; n < plan.size(); ++n) {
        for (Eigen::Index l = 0; l < n_nodes; ++l) {
            const double share = schedule.rho(n, l);
            if (share <= 0.0) {
                continue;
            }
            const GroundNode& node = scenario.nodes[static_cast<std::size_t>(l)];
            const double x = h2 + (plan.q.col(n) - node.position).squaredNorm();
            terms.push_back({l, scenario.channel.bandwidth_hz * plan.grid.dt(n) * share,
                             reference_snr(node, scenario.channel) / std::pow(x, alpha)});
        }
    }

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> exponential(1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double los = fading.kind == FadingModel::Kind::rician ? std::sqrt(fading.k_factor / (fading.k_factor + 1.0)) : 0.0;
    const double scatter = fading.kind == FadingModel::Kind::rician ? std::sqrt(0.5 / (fading.k_factor + 1.0)) : 0.0;
    auto draw_power = [&]() {
        switch (fading.kind) {
        case FadingModel::Kind::none: return 1.0;
        case FadingModel::Kind::rayleigh: return exponential(rng);
        case FadingModel::Kind::rician: {
            const double re = los + scatter * normal(rng);
            const double im = scatter * normal(rng);
            return re * re + im * im;
        }
        }
        return 1.0;
    };

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_nodes);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n_nodes);
    Eigen::VectorXd bits(n_nodes);
    for (long s = 0; s < n_samples; ++s) {
        bits.setZero();
        for (const Term& term : terms) {
            bits(term.node) += term.weight * std::log2(1.0 + term.snr * draw_power());
        }
        // Welford update
        const double count = static_cast<double>(s + 1);
        const Eigen::VectorXd delta = bits - mean;
        mean += delta / count;
        m2 += delta.cwiseProduct(bits - mean);
    }

    MonteCarloResult result;
    result.samples = n_samples;
    result.mean_bits = mean;
    const double n = static_cast<double>(n_samples);
    result.stderr_bits = (m2 / (n - 1.0)).cwiseSqrt() / std::sqrt(n);
    return result;
}

} // namespace rhotraj
