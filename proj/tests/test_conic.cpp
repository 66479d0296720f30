#include "rhotraj/conic.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace rhotraj::conic;

namespace {

/// max c'x over {D x <= e, 0 <= x <= ub} by enumerating basic solutions.
double lp_by_vertices(const Eigen::VectorXd& c, const Eigen::MatrixXd& D, const Eigen::VectorXd& e, double ub) {
    const int n = static_cast<int>(c.size());
    const int rows = static_cast<int>(D.rows()) + 2 * n;
    Eigen::MatrixXd M(rows, n);
    Eigen::VectorXd r(rows);
    M << D, Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
    r << e, Eigen::VectorXd::Constant(n, ub), Eigen::VectorXd::Zero(n);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<std::size_t>(n));
    // all n-subsets of rows
    std::vector<bool> mask(static_cast<std::size_t>(rows), false);
    std::fill(mask.begin(), mask.begin() + n, true);
    do {
        Eigen::MatrixXd S(n, n);
        Eigen::VectorXd t(n);
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
        if (((M * x - r).array() <= 1e-9).all()) best = std::max(best, c.dot(x));
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return best;
}

/// Dual residual and complementarity of a solution on the original program.
void check_kkt(const Program& p, const Solution& sol, double tol) {
    const Eigen::VectorXd grad = p.c + p.A.transpose() * sol.y + p.G.transpose() * sol.z;
    CHECK(grad.lpNorm<Eigen::Infinity>() <= tol * (1.0 + p.c.lpNorm<Eigen::Infinity>()));
    const Eigen::VectorXd slack = p.h - p.G * sol.x;
    CHECK((slack - sol.s).lpNorm<Eigen::Infinity>() <= tol * (1.0 + p.h.lpNorm<Eigen::Infinity>()));
    CHECK(std::abs(sol.s.dot(sol.z)) <= 1e-5 * (1.0 + std::abs(sol.primal_objective)));
}

} // namespace

TEST_CASE("random LPs match vertex enumeration") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 3;
        const int m = 5;
        Eigen::VectorXd c(n);
        Eigen::MatrixXd D(m, n);
        Eigen::VectorXd e(m);
        for (int j = 0; j < n; ++j) c(j) = u(rng);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) D(i, j) = u(rng);
            e(i) = 1.0 + u(rng);  // the origin is feasible
        }
        const double ub = 10.0;

        ProgramBuilder b;
        std::vector<int> x;
        for (int j = 0; j < n; ++j) x.push_back(b.add_variable());
        Affine obj;
        for (int j = 0; j < n; ++j) obj -= Affine::var(x[static_cast<std::size_t>(j)], c(j));
        b.minimize(obj);
        for (int i = 0; i < m; ++i) {
            Affine row = e(i);
            for (int j = 0; j < n; ++j) row -= Affine::var(x[static_cast<std::size_t>(j)], D(i, j));
            b.add_nonnegative(row);
        }
        for (int j = 0; j < n; ++j) {
            b.add_nonnegative(Affine::var(x[static_cast<std::size_t>(j)]));
            b.add_nonnegative(ub - Affine::var(x[static_cast<std::size_t>(j)]));
        }
        const Program p = b.build();
        const Solution sol = solve(p);
        REQUIRE(sol.optimal());
        const double expected = lp_by_vertices(c, D, e, ub);
        CHECK(-sol.primal_objective == doctest::Approx(expected).epsilon(1e-6));
        check_kkt(p, sol, 1e-6);
    }
}

TEST_CASE("distance to a hyperplane") {
    // min |x - p|  s.t.  a'x = beta
    const Eigen::Vector3d p(1.0, -2.0, 0.5);
    const Eigen::Vector3d a(2.0, 1.0, -1.0);
    const double beta = 4.0;
    ProgramBuilder b;
    const int t = b.add_variable("t");
    std::vector<int> x{b.add_variable(), b.add_variable(), b.add_variable()};
    b.minimize(Affine::var(t));
    Affine eq = -beta;
    for (int j = 0; j < 3; ++j) eq += Affine::var(x[static_cast<std::size_t>(j)], a(j));
    b.add_equality(eq);
    std::vector<Affine> cone{Affine::var(t)};
    for (int j = 0; j < 3; ++j) cone.push_back(Affine::var(x[static_cast<std::size_t>(j)]) - p(j));
    b.add_soc(cone);
    const Program prog = b.build();
    const Solution sol = solve(prog);
    REQUIRE(sol.optimal());
    CHECK(sol.primal_objective == doctest::Approx(std::abs(a.dot(p) - beta) / a.norm()).epsilon(1e-7));
    check_kkt(prog, sol, 1e-6);
}

TEST_CASE("rotated cone epigraph of a square") {
    // min t  s.t.  2 t >= x^2, x = 3
    ProgramBuilder b;
    const int t = b.add_variable();
    const int x = b.add_variable();
    b.minimize(Affine::var(t));
    b.add_equality(Affine::var(x) - 3.0);
    b.add_rotated_soc(Affine::var(t), 1.0, {Affine::var(x)});
    const Solution sol = solve(b.build());
    REQUIRE(sol.optimal());
    CHECK(sol.x(t) == doctest::Approx(4.5).epsilon(1e-7));
}

TEST_CASE("objective constant is carried by the builder") {
    ProgramBuilder b;
    const int x = b.add_variable();
    b.minimize(Affine::var(x) + 7.0);
    b.add_nonnegative(Affine::var(x) - 2.0);
    CHECK(b.objective_constant() == 7.0);
    const Solution sol = solve(b.build());
    REQUIRE(sol.optimal());
    CHECK(sol.primal_objective + b.objective_constant() == doctest::Approx(9.0).epsilon(1e-7));
}

TEST_CASE("infeasible and unbounded programs are reported") {
    {
        ProgramBuilder b;
        const int x = b.add_variable();
        b.minimize(Affine::var(x));
        b.add_nonnegative(Affine::var(x) - 1.0);
        b.add_nonnegative(-Affine::var(x));
        CHECK(solve(b.build()).status == Status::infeasible);
    }
    {
        ProgramBuilder b;
        const int x = b.add_variable();
        b.minimize(-Affine::var(x));
        b.add_nonnegative(Affine::var(x));
        CHECK(solve(b.build()).status == Status::unbounded);
    }
    {
        // cone infeasible: |(x, 1)| <= 0.5 has no solution
        ProgramBuilder b;
        const int x = b.add_variable();
        b.minimize(Affine::var(x));
        b.add_soc({Affine(0.5), Affine::var(x), Affine(1.0)});
        CHECK(solve(b.build()).status == Status::infeasible);
    }
}

TEST_CASE("malformed programs fail without throwing") {
    Program p;
    p.c = Eigen::VectorXd::Ones(2);
    p.A.resize(0, 3);
    p.G.resize(0, 2);
    p.b.resize(0);
    p.h.resize(0);
    CHECK(solve(p).status == Status::numerical_failure);
}

TEST_CASE("builder layout and dump") {
    ProgramBuilder b;
    const int x = b.add_variable("x");
    const int y = b.add_variable("y");
    b.minimize(Affine::var(x) + 2.0 * Affine::var(y));
    b.add_soc({Affine::var(x), Affine::var(y)});
    b.add_nonnegative(Affine::var(y) + 1.0);
    b.add_equality(Affine::var(x) - Affine::var(y) - 1.0);
    const Program p = b.build();
    // orthant rows come first regardless of insertion order
    CHECK(p.cones.orthant == 1);
    REQUIRE(p.cones.soc.size() == 1);
    CHECK(p.cones.rows() == 3);
    CHECK(p.A.rows() == 1);
    CHECK(p.b(0) == 1.0);
    // h - G x reproduces the affine expressions
    const Eigen::Vector2d at(3.0, -0.5);
    const Eigen::VectorXd slack = p.h - p.G * at;
    CHECK(slack(0) == doctest::Approx(0.5));
    CHECK(slack(1) == doctest::Approx(3.0));
    CHECK(slack(2) == doctest::Approx(-0.5));

    std::ostringstream os;
    dump(p, os);
    const std::string text = os.str();
    CHECK(text.find("variables 2") != std::string::npos);
    CHECK(text.find("x1 y") != std::string::npos);
    CHECK(text.find("soc 1") != std::string::npos);
    CHECK(text.find("equalities 1") != std::string::npos);
}
