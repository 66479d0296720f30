#ifndef RHOTRAJ_CONIC_HPP
#define RHOTRAJ_CONIC_HPP

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rhotraj::conic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Cone layout of the rows of G: `orthant` nonnegative rows first, then one
/// second-order cone {(u0, u1) : u0 >= |u1|} per entry of `soc`.
struct ConeDims {
    int orthant = 0;
    std::vector<int> soc;

    int rows() const;
    /// Barrier degree: one per orthant row and one per second-order cone.
    int degree() const { return orthant + static_cast<int>(soc.size()); }
};

/// minimize c'x  subject to  A x = b,  h - G x in K.
struct Program {
    Eigen::VectorXd c;
    SparseMatrix A;
    Eigen::VectorXd b;
    SparseMatrix G;
    Eigen::VectorXd h;
    ConeDims cones;
    std::vector<std::string> names;  // optional, for dumps

    int variables() const { return static_cast<int>(c.size()); }
};

struct Settings {
    double feas_tol = 1e-8;   // relative primal/dual residual
    double opt_tol = 1e-6;    // duality gap over max(1, |objective|)
    double abs_tol = 1e-10;   // absolute duality gap on the scaled problem
    int max_iter = 80;
    bool equilibrate = true;
    bool verbose = false;     // per-iteration log on stderr
};

enum class Status { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

std::string to_string(Status status);

struct Solution {
    Status status = Status::numerical_failure;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    Eigen::VectorXd s;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double relative_gap = 0.0;
    int iterations = 0;

    bool optimal() const { return status == Status::optimal; }
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra correction. Never throws on numerical trouble; see `status`.
Solution solve(const Program& program, const Settings& settings = {});

/// Sparse linear combination of variables plus a constant.
struct Affine {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    Affine() = default;
    Affine(double value) : constant(value) {}  // NOLINT(google-explicit-constructor)
    static Affine var(int index, double coeff = 1.0) {
        Affine e;
        e.terms.emplace_back(index, coeff);
        return e;
    }

    Affine& operator+=(const Affine& rhs);
    Affine& operator-=(const Affine& rhs);
    Affine& operator*=(double k);
    double evaluate(const Eigen::VectorXd& x) const;
};

Affine operator+(Affine lhs, const Affine& rhs);
Affine operator-(Affine lhs, const Affine& rhs);
Affine operator*(Affine lhs, double k);
Affine operator*(double k, Affine rhs);
Affine operator-(Affine e);

/// Collects variables and constraints in any order and lays them out as a
/// Program.
class ProgramBuilder {
public:
    int add_variable(std::string name = {});
    int variables() const { return static_cast<int>(names_.size()); }

    /// Objective to minimize; the constant is reported back through
    /// `objective_constant()`.
    void minimize(const Affine& objective);
    double objective_constant() const { return objective_.constant; }

    void add_equality(const Affine& e);      // e == 0
    void add_nonnegative(const Affine& e);   // e >= 0
    /// components[0] >= |components[1..]|
    void add_soc(const std::vector<Affine>& components);
    /// 2 x y >= |w|^2 with x, y >= 0
    void add_rotated_soc(const Affine& x, const Affine& y, const std::vector<Affine>& w);

    Program build() const;

private:
    std::vector<std::string> names_;
    Affine objective_;
    std::vector<Affine> equalities_;
    std::vector<Affine> nonnegative_;
    std::vector<std::vector<Affine>> socs_;
};

/// Plain-text listing of variables, objective and constraints, one row per line.
void dump(const Program& program, std::ostream& out);

} // namespace rhotraj::conic

#endif
