#pragma once

#include "rhotraj/scenario.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <random>
#include <vector>

namespace testing {

/// L nodes uniform in a side x side square centred at the origin, defaults otherwise.
inline rhotraj::Scenario random_scenario(std::uint64_t seed, int nodes = 3, double period_s = 120.0,
                                         double side_m = 800.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-0.5 * side_m, 0.5 * side_m);
    rhotraj::Scenario s;
    for (int l = 0; l < nodes; ++l) {
        rhotraj::GroundNode node;
        node.position = rhotraj::Vec2(coord(rng), coord(rng));
        s.nodes.push_back(node);
    }
    s.period_s = period_s;
    return s;
}

/// Max-min throughput of the schedule LP
///   max eta  s.t.  carry_l + sum_n dt_n rate(n, l) rho(n, l) >= eta,  sum_l rho(n, l) <= 1,  rho >= 0
/// by enumerating every basic solution. Exponential; keep N L small.
inline double schedule_lp_by_vertices(const Eigen::VectorXd& dt, const Eigen::MatrixXd& rates,
                                      const Eigen::VectorXd& carry) {
    const int slots = static_cast<int>(rates.rows());
    const int nodes = static_cast<int>(rates.cols());
    const int dim = slots * nodes + 1;  // rho (row-major), eta
    const int rows = nodes + slots + slots * nodes;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows, dim);  // M x <= r
    Eigen::VectorXd r = Eigen::VectorXd::Zero(rows);
    for (int l = 0; l < nodes; ++l) {
        for (int n = 0; n < slots; ++n) M(l, n * nodes + l) = -dt(n) * rates(n, l);
        M(l, dim - 1) = 1.0;
        r(l) = carry(l);
    }
    for (int n = 0; n < slots; ++n) {
        for (int l = 0; l < nodes; ++l) M(nodes + n, n * nodes + l) = 1.0;
        r(nodes + n) = 1.0;
    }
    for (int k = 0; k < slots * nodes; ++k) M(nodes + slots + k, k) = -1.0;

    double best = -std::numeric_limits<double>::infinity();
    std::vector<bool> mask(static_cast<std::size_t>(rows), false);
    std::fill(mask.begin(), mask.begin() + dim, true);
    Eigen::MatrixXd S(dim, dim);
    Eigen::VectorXd t(dim);
    do {
        int k = 0;
        for (int i = 0; i < rows; ++i) {
            if (mask[static_cast<std::size_t>(i)]) {
                S.row(k) = M.row(i);
                t(k++) = r(i);
            }
        }
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd x = lu.solve(t);
        const double scale = 1.0 + r.cwiseAbs().maxCoeff();
        if (((M * x - r).array() <= 1e-9 * scale).all()) best = std::max(best, x(dim - 1));
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return best;
}

/// Central difference of f at x along each axis.
template <typename F>
Eigen::Vector2d central_gradient(F f, const Eigen::Vector2d& x, double h) {
    Eigen::Vector2d g;
    for (int i = 0; i < 2; ++i) {
        Eigen::Vector2d up = x;
        Eigen::Vector2d down = x;
        up(i) += h;
        down(i) -= h;
        g(i) = (f(up) - f(down)) / (2.0 * h);
    }
    return g;
}

} // namespace testing
