#include "rhotraj/conic.hpp"

#include <Eigen/OrderingMethods>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace rhotraj::conic {

int ConeDims::rows() const { return orthant + std::accumulate(soc.begin(), soc.end(), 0); }

std::string to_string(Status status) {
    switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
    case Status::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Affine expressions and the builder

Affine& Affine::operator+=(const Affine& rhs) {
    terms.insert(terms.end(), rhs.terms.begin(), rhs.terms.end());
    constant += rhs.constant;
    return *this;
}

Affine& Affine::operator-=(const Affine& rhs) {
    for (const auto& [index, coeff] : rhs.terms) {
        terms.emplace_back(index, -coeff);
    }
    constant -= rhs.constant;
    return *this;
}

Affine& Affine::operator*=(double k) {
    for (auto& term : terms) {
        term.second *= k;
    }
    constant *= k;
    return *this;
}

double Affine::evaluate(const Eigen::VectorXd& x) const {
    double value = constant;
    for (const auto& [index, coeff] : terms) {
        value += coeff * x(index);
    }
    return value;
}

Affine operator+(Affine lhs, const Affine& rhs) { return lhs += rhs; }
Affine operator-(Affine lhs, const Affine& rhs) { return lhs -= rhs; }
Affine operator*(Affine lhs, double k) { return lhs *= k; }
Affine operator*(double k, Affine rhs) { return rhs *= k; }
Affine operator-(Affine e) { return e *= -1.0; }

int ProgramBuilder::add_variable(std::string name) {
    names_.push_back(std::move(name));
    return static_cast<int>(names_.size()) - 1;
}

void ProgramBuilder::minimize(const Affine& objective) { objective_ = objective; }

void ProgramBuilder::add_equality(const Affine& e) { equalities_.push_back(e); }

void ProgramBuilder::add_nonnegative(const Affine& e) { nonnegative_.push_back(e); }

void ProgramBuilder::add_soc(const std::vector<Affine>& components) { socs_.push_back(components); }

void ProgramBuilder::add_rotated_soc(const Affine& x, const Affine& y, const std::vector<Affine>& w) {
    // (x + y)^2 - (x - y)^2 = 4xy >= 2|w|^2
    std::vector<Affine> cone;
    cone.reserve(w.size() + 2);
    cone.push_back(x + y);
    cone.push_back(x - y);
    for (const auto& wi : w) {
        cone.push_back(std::sqrt(2.0) * wi);
    }
    socs_.push_back(std::move(cone));
}

Program ProgramBuilder::build() const {
    const int n = variables();
    Program program;
    program.names = names_;
    program.c = Eigen::VectorXd::Zero(n);
    for (const auto& [index, coeff] : objective_.terms) {
        program.c(index) += coeff;
    }

    using Triplet = Eigen::Triplet<double, int>;
    auto assemble = [n](const std::vector<const Affine*>& rows, double sign, SparseMatrix& mat, Eigen::VectorXd& rhs) {
        std::vector<Triplet> triplets;
        rhs.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (const auto& [index, coeff] : rows[r]->terms) {
                triplets.emplace_back(static_cast<int>(r), index, sign * coeff);
            }
            rhs(static_cast<Eigen::Index>(r)) = rows[r]->constant;
        }
        mat.resize(static_cast<int>(rows.size()), n);
        mat.setFromTriplets(triplets.begin(), triplets.end());
        mat.prune(0.0);
    };

    // A x + constant == 0  ->  A x = -constant
    std::vector<const Affine*> eq;
    for (const auto& e : equalities_) {
        eq.push_back(&e);
    }
    assemble(eq, 1.0, program.A, program.b);
    program.b = -program.b;

    // s = e(x) = F x + f  ->  G = -F, h = f
    std::vector<const Affine*> cone_rows;
    for (const auto& e : nonnegative_) {
        cone_rows.push_back(&e);
    }
    program.cones.orthant = static_cast<int>(nonnegative_.size());
    for (const auto& cone : socs_) {
        for (const auto& e : cone) {
            cone_rows.push_back(&e);
        }
        program.cones.soc.push_back(static_cast<int>(cone.size()));
    }
    assemble(cone_rows, -1.0, program.G, program.h);
    return program;
}

void dump(const Program& program, std::ostream& out) {
    const int n = program.variables();
    out << "variables " << n << '\n';
    for (int j = 0; j < n; ++j) {
        const bool named = j < static_cast<int>(program.names.size()) && !program.names[static_cast<std::size_t>(j)].empty();
        out << "  x" << j << (named ? " " + program.names[static_cast<std::size_t>(j)] : std::string{}) << '\n';
    }
    out << "minimize";
    for (int j = 0; j < n; ++j) {
        if (program.c(j) != 0.0) {
            out << ' ' << program.c(j) << "*x" << j;
        }
    }
    out << '\n';

    const Eigen::SparseMatrix<double, Eigen::RowMajor> A = program.A;
    const Eigen::SparseMatrix<double, Eigen::RowMajor> G = program.G;
    auto row_text = [](const Eigen::SparseMatrix<double, Eigen::RowMajor>& M, int r) {
        std::string text;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(M, r); it; ++it) {
            text += ' ' + std::to_string(it.value()) + "*x" + std::to_string(it.col());
        }
        return text;
    };
    out << "equalities " << A.rows() << '\n';
    for (int r = 0; r < A.rows(); ++r) {
        out << "  eq" << r << ':' << row_text(A, r) << " = " << program.b(r) << '\n';
    }
    out << "orthant " << program.cones.orthant << '\n';
    int row = 0;
    for (; row < program.cones.orthant; ++row) {
        out << "  nn" << row << ": " << program.h(row) << " -" << row_text(G, row) << " >= 0\n";
    }
    out << "soc " << program.cones.soc.size() << '\n';
    for (std::size_t k = 0; k < program.cones.soc.size(); ++k) {
        out << "  soc" << k << " dim " << program.cones.soc[k] << '\n';
        for (int i = 0; i < program.cones.soc[k]; ++i, ++row) {
            out << "    " << (i == 0 ? "t" : "u") << ": " << program.h(row) << " -" << row_text(G, row) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Cone algebra

namespace {

using Vector = Eigen::VectorXd;

class Cones {
public:
    explicit Cones(const ConeDims& dims) : orthant_(dims.orthant), dims_(dims.soc) {
        int offset = dims.orthant;
        for (int d : dims.soc) {
            offsets_.push_back(offset);
            offset += d;
        }
        rows_ = offset;
    }

    int rows() const { return rows_; }
    int degree() const { return orthant_ + static_cast<int>(dims_.size()); }

    /// Smallest "distance" to the boundary: u_i for orthant rows, u0 - |u1| for cones.
    double min_margin(const Vector& u) const {
        double margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < orthant_; ++i) {
            margin = std::min(margin, u(i));
        }
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int o = offsets_[k];
            margin = std::min(margin, u(o) - u.segment(o + 1, dims_[k] - 1).norm());
        }
        return margin;
    }

    void add_identity(Vector& u, double t) const {
        u.head(orthant_).array() += t;
        for (int o : offsets_) {
            u(o) += t;
        }
    }

    /// Largest alpha with u + alpha du in the cone (u interior); +inf if unbounded.
    double max_step(const Vector& u, const Vector& du) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (int i = 0; i < orthant_; ++i) {
            if (du(i) < 0.0) {
                alpha = std::min(alpha, -u(i) / du(i));
            }
        }
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int o = offsets_[k];
            const int d = dims_[k];
            const double u0 = u(o);
            const double d0 = du(o);
            const auto u1 = u.segment(o + 1, d - 1);
            const auto d1 = du.segment(o + 1, d - 1);
            const double qa = d0 * d0 - d1.squaredNorm();
            const double qb = 2.0 * (u0 * d0 - u1.dot(d1));
            const double qc = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
            alpha = std::min(alpha, smallest_positive_root(qa, qb, qc, u0, d0));
        }
        return alpha;
    }

    /// Jordan product u o v.
    Vector product(const Vector& u, const Vector& v) const {
        Vector out(rows_);
        out.head(orthant_) = u.head(orthant_).cwiseProduct(v.head(orthant_));
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int o = offsets_[k];
            const int d = dims_[k];
            out(o) = u.segment(o, d).dot(v.segment(o, d));
            out.segment(o + 1, d - 1) = u(o) * v.segment(o + 1, d - 1) + v(o) * u.segment(o + 1, d - 1);
        }
        return out;
    }

    /// Solves lambda o x = d for x.
    Vector divide(const Vector& lambda, const Vector& d) const {
        Vector out(rows_);
        out.head(orthant_) = d.head(orthant_).cwiseQuotient(lambda.head(orthant_));
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const int o = offsets_[k];
            const int m = dims_[k] - 1;
            const double l0 = lambda(o);
            const auto l1 = lambda.segment(o + 1, m);
            const double det = l0 * l0 - l1.squaredNorm();
            const double x0 = (l0 * d(o) - l1.dot(d.segment(o + 1, m))) / det;
            out(o) = x0;
            out.segment(o + 1, m) = (d.segment(o + 1, m) - x0 * l1) / l0;
        }
        return out;
    }

    Vector identity() const {
        Vector e = Vector::Zero(rows_);
        add_identity(e, 1.0);
        return e;
    }

    int orthant() const { return orthant_; }
    const std::vector<int>& soc_dims() const { return dims_; }
    const std::vector<int>& soc_offsets() const { return offsets_; }

private:
    static double smallest_positive_root(double a, double b, double c, double u0, double d0) {
        const double inf = std::numeric_limits<double>::infinity();
        const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
        if (std::abs(a) <= 1e-14 * scale) {
            if (b < 0.0) {
                return -c / b;
            }
            return d0 < 0.0 ? -u0 / d0 : inf;
        }
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) {
            return inf;  // a > 0 and the J-norm stays positive
        }
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        double best = inf;
        for (double r : {q / a, q != 0.0 ? c / q : inf}) {
            if (r > 0.0) {
                best = std::min(best, r);
            }
        }
        return best;
    }

    int orthant_;
    std::vector<int> dims_;
    std::vector<int> offsets_;
    int rows_ = 0;
};

/// Nesterov-Todd scaling W with W z = W^-1 s = lambda; W symmetric.
struct NtScaling {
    Vector orthant_w;              // sqrt(s / z)
    std::vector<double> eta;       // per cone
    std::vector<double> wbar;      // per cone, flattened unit-hyperboloid point
    Vector lambda;

    void compute(const Cones& cones, const Vector& s, const Vector& z) {
        const int m = cones.orthant();
        orthant_w = (s.head(m).array() / z.head(m).array()).sqrt();
        const auto& dims = cones.soc_dims();
        const auto& offsets = cones.soc_offsets();
        eta.resize(dims.size());
        wbar.resize(static_cast<std::size_t>(cones.rows() - m));
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const int o = offsets[k];
            const int d = dims[k];
            const auto sk = s.segment(o, d);
            const auto zk = z.segment(o, d);
            const double snorm = std::sqrt(std::max(sk(0) * sk(0) - sk.tail(d - 1).squaredNorm(), 1e-300));
            const double znorm = std::sqrt(std::max(zk(0) * zk(0) - zk.tail(d - 1).squaredNorm(), 1e-300));
            const Vector sb = sk / snorm;
            const Vector zb = zk / znorm;
            const double gamma = std::sqrt(std::max(0.5 * (1.0 + sb.dot(zb)), 1e-300));
            double* w = &wbar[static_cast<std::size_t>(o - m)];
            w[0] = (sb(0) + zb(0)) / (2.0 * gamma);
            for (int i = 1; i < d; ++i) {
                w[i] = (sb(i) - zb(i)) / (2.0 * gamma);
            }
            eta[k] = std::sqrt(snorm / znorm);
        }
        lambda = apply(cones, z, false);
    }

    /// W u (inverse = false) or W^-1 u (inverse = true).
    Vector apply(const Cones& cones, const Vector& u, bool inverse) const {
        const int m = cones.orthant();
        Vector out(u.size());
        if (inverse) {
            out.head(m) = u.head(m).cwiseQuotient(orthant_w);
        } else {
            out.head(m) = u.head(m).cwiseProduct(orthant_w);
        }
        for (std::size_t k = 0; k < cones.soc_dims().size(); ++k) {
            const int o = cones.soc_offsets()[k];
            out.segment(o, cones.soc_dims()[k]) = apply_cone(cones, k, u.segment(o, cones.soc_dims()[k]), inverse);
        }
        return out;
    }

    /// W_k u or W_k^-1 u for the k-th second-order cone.
    Vector apply_cone(const Cones& cones, std::size_t k, const Eigen::Ref<const Vector>& u, bool inverse) const {
        const int d = cones.soc_dims()[k];
        const Eigen::Map<const Vector> w(&wbar[static_cast<std::size_t>(cones.soc_offsets()[k] - cones.orthant())], d);
        const double sign = inverse ? -1.0 : 1.0;
        const double scale = inverse ? 1.0 / eta[k] : eta[k];
        const auto u1 = u.tail(d - 1);
        const auto w1 = w.tail(d - 1);
        const double w1u1 = w1.dot(u1);
        Vector out(d);
        out(0) = scale * (w(0) * u(0) + sign * w1u1);
        out.tail(d - 1) = scale * (sign * u(0) * w1 + u1 + (w1u1 / (1.0 + w(0))) * w1);
        return out;
    }
};

/// Up-looking sparse LDL' of a symmetric quasi-definite matrix given by its
/// upper triangle. Pivots whose sign disagrees with `signs`, or that are too
/// small, are replaced by a signed regularization.
class QuasiDefiniteLdl {
public:
    void analyze(const SparseMatrix& upper, const Vector& signs) {
        n_ = static_cast<int>(upper.rows());
        {
            const SparseMatrix full = upper.selfadjointView<Eigen::Upper>();
            Eigen::AMDOrdering<int> amd;
            amd(full, pinv_);
            perm_ = pinv_.inverse();
        }
        // permute once with the value slots as payload to get the gather map
        SparseMatrix tagged = upper;
        for (int k = 0; k < tagged.nonZeros(); ++k) {
            tagged.valuePtr()[k] = static_cast<double>(k);
        }
        permuted_.resize(n_, n_);
        permuted_.selfadjointView<Eigen::Upper>() = tagged.selfadjointView<Eigen::Upper>().twistedBy(perm_);
        permuted_.makeCompressed();
        gather_.resize(static_cast<std::size_t>(permuted_.nonZeros()));
        for (int k = 0; k < permuted_.nonZeros(); ++k) {
            gather_[static_cast<std::size_t>(k)] = static_cast<int>(permuted_.valuePtr()[k]);
        }
        signs_ = perm_ * signs;

        // elimination tree and column counts
        const int* Ap = permuted_.outerIndexPtr();
        const int* Ai = permuted_.innerIndexPtr();
        etree_.assign(static_cast<std::size_t>(n_), -1);
        std::vector<int> count(static_cast<std::size_t>(n_), 0);
        std::vector<int> mark(static_cast<std::size_t>(n_), -1);
        for (int j = 0; j < n_; ++j) {
            mark[static_cast<std::size_t>(j)] = j;
            for (int p = Ap[j]; p < Ap[j + 1]; ++p) {
                int i = Ai[p];
                while (i < j && mark[static_cast<std::size_t>(i)] != j) {
                    if (etree_[static_cast<std::size_t>(i)] == -1) {
                        etree_[static_cast<std::size_t>(i)] = j;
                    }
                    ++count[static_cast<std::size_t>(i)];
                    mark[static_cast<std::size_t>(i)] = j;
                    i = etree_[static_cast<std::size_t>(i)];
                }
            }
        }
        Lp_.assign(static_cast<std::size_t>(n_) + 1, 0);
        for (int i = 0; i < n_; ++i) {
            Lp_[static_cast<std::size_t>(i) + 1] = Lp_[static_cast<std::size_t>(i)] + count[static_cast<std::size_t>(i)];
        }
        Li_.resize(static_cast<std::size_t>(Lp_.back()));
        Lx_.resize(static_cast<std::size_t>(Lp_.back()));
        D_.resize(n_);
    }

    /// `values` are the entries of the upper triangle in the analyzed layout.
    bool factor(const double* values, double eps, double delta) {
        const std::size_t n = static_cast<std::size_t>(n_);
        const int* Ap = permuted_.outerIndexPtr();
        const int* Ai = permuted_.innerIndexPtr();
        double* Ax = permuted_.valuePtr();
        for (std::size_t k = 0; k < gather_.size(); ++k) {
            Ax[k] = values[gather_[k]];
        }
        std::vector<double> y(n, 0.0);
        std::vector<char> used(n, 0);
        std::vector<int> pattern;
        std::vector<int> stack;
        std::vector<int> next(Lp_.begin(), Lp_.end() - 1);
        regularized_ = 0;
        for (int k = 0; k < n_; ++k) {
            pattern.clear();
            double diag = 0.0;
            for (int p = Ap[k]; p < Ap[k + 1]; ++p) {
                int i = Ai[p];
                if (i == k) {
                    diag = Ax[p];
                    continue;
                }
                y[static_cast<std::size_t>(i)] = Ax[p];
                stack.clear();
                while (i != -1 && i < k && !used[static_cast<std::size_t>(i)]) {
                    used[static_cast<std::size_t>(i)] = 1;
                    stack.push_back(i);
                    i = etree_[static_cast<std::size_t>(i)];
                }
                pattern.insert(pattern.end(), stack.rbegin(), stack.rend());
            }
            // pattern holds root-to-leaf paths; process in reverse topological order
            for (auto it = pattern.rbegin(); it != pattern.rend(); ++it) {
                const int c = *it;
                const std::size_t cu = static_cast<std::size_t>(c);
                const double yc = y[cu];
                const int end = next[cu];
                for (int q = Lp_[cu]; q < end; ++q) {
                    y[static_cast<std::size_t>(Li_[static_cast<std::size_t>(q)])] -= Lx_[static_cast<std::size_t>(q)] * yc;
                }
                const double lkc = yc / D_(c);
                Li_[static_cast<std::size_t>(end)] = k;
                Lx_[static_cast<std::size_t>(end)] = lkc;
                diag -= yc * lkc;
                ++next[cu];
                y[cu] = 0.0;
                used[cu] = 0;
            }
            if (signs_(k) * diag <= eps) {
                diag = signs_(k) * delta;
                ++regularized_;
            }
            if (!std::isfinite(diag)) {
                return false;
            }
            D_(k) = diag;
        }
        return true;
    }

    Vector solve(const Vector& rhs) const {
        Vector x = perm_ * rhs;
        for (int i = 0; i < n_; ++i) {
            const double xi = x(i);
            for (int q = Lp_[static_cast<std::size_t>(i)]; q < Lp_[static_cast<std::size_t>(i) + 1]; ++q) {
                x(Li_[static_cast<std::size_t>(q)]) -= Lx_[static_cast<std::size_t>(q)] * xi;
            }
        }
        x.array() /= D_.array();
        for (int i = n_ - 1; i >= 0; --i) {
            double xi = x(i);
            for (int q = Lp_[static_cast<std::size_t>(i)]; q < Lp_[static_cast<std::size_t>(i) + 1]; ++q) {
                xi -= Lx_[static_cast<std::size_t>(q)] * x(Li_[static_cast<std::size_t>(q)]);
            }
            x(i) = xi;
        }
        return pinv_ * x;
    }

    int regularized() const { return regularized_; }

private:
    int n_ = 0;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv_;
    SparseMatrix permuted_;
    std::vector<int> gather_;
    Vector signs_;
    std::vector<int> etree_;
    std::vector<int> Lp_;
    std::vector<int> Li_;
    std::vector<double> Lx_;
    Vector D_;
    int regularized_ = 0;
};

// ---------------------------------------------------------------------------
// KKT system
//   [0 A' G'; A 0 0; G 0 -W'W] (x, y, z) = (rx, ry, rz).
// z is eliminated: with G~ = W^-1 G the remaining system is
//   [G~'G~ A'; A 0] (x, y) = (rx + G~' W^-1 rz, ry),   z = W^-1 (G~ x - W^-1 rz).
// Blocks touching many columns would make G~'G~ dense; their z~ = W z stays in
// the factored system with a -I diagonal instead. Both blocks get a small
// static regularization that iterative refinement against the unregularized
// system removes.

class Kkt {
public:
    Kkt(const SparseMatrix& A, const SparseMatrix& G, const Cones& cones) : cones_(cones) {
        n_ = static_cast<int>(A.cols());
        p_ = static_cast<int>(A.rows());
        m_ = static_cast<int>(G.rows());

        // one block per orthant row and per cone; each keeps the dense rows of G
        // restricted to the union of their columns
        const Eigen::SparseMatrix<double, Eigen::RowMajor, int> Gr = G;
        auto add_block = [&](int row, int dim_block, int cone) {
            Block blk;
            blk.row = row;
            blk.dim = dim_block;
            blk.cone = cone;
            for (int r = row; r < row + dim_block; ++r) {
                for (decltype(Gr)::InnerIterator it(Gr, r); it; ++it) {
                    blk.cols.push_back(static_cast<int>(it.col()));
                }
            }
            std::sort(blk.cols.begin(), blk.cols.end());
            blk.cols.erase(std::unique(blk.cols.begin(), blk.cols.end()), blk.cols.end());
            blk.g = Eigen::MatrixXd::Zero(dim_block, static_cast<Eigen::Index>(blk.cols.size()));
            for (int r = row; r < row + dim_block; ++r) {
                for (decltype(Gr)::InnerIterator it(Gr, r); it; ++it) {
                    const auto pos = std::lower_bound(blk.cols.begin(), blk.cols.end(), static_cast<int>(it.col())) - blk.cols.begin();
                    blk.g(r - row, pos) = it.value();
                }
            }
            blocks_.push_back(std::move(blk));
        };
        for (int i = 0; i < cones.orthant(); ++i) {
            add_block(i, 1, -1);
        }
        for (std::size_t k = 0; k < cones.soc_dims().size(); ++k) {
            add_block(cones.soc_offsets()[k], cones.soc_dims()[k], static_cast<int>(k));
        }
        int kept = 0;
        for (Block& blk : blocks_) {
            if (blk.cols.size() > kWideBlock) {
                blk.kept = n_ + p_ + kept;
                kept += blk.dim;
            }
        }
        const int dim = n_ + p_ + kept;

        using Triplet = Eigen::Triplet<double, int>;
        std::vector<Triplet> triplets;
        for (int j = 0; j < n_; ++j) {
            triplets.emplace_back(j, j, 0.0);
        }
        for (int j = 0; j < A.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
                triplets.emplace_back(j, n_ + static_cast<int>(it.row()), it.value());
            }
        }
        for (int i = 0; i < p_; ++i) {
            triplets.emplace_back(n_ + i, n_ + i, -kReg);
        }
        for (const Block& blk : blocks_) {
            if (blk.kept >= 0) {
                for (int r = 0; r < blk.dim; ++r) {
                    for (int col : blk.cols) {
                        triplets.emplace_back(col, blk.kept + r, 0.0);
                    }
                    triplets.emplace_back(blk.kept + r, blk.kept + r, -1.0);
                }
                continue;
            }
            for (std::size_t b = 0; b < blk.cols.size(); ++b) {
                for (std::size_t a = 0; a <= b; ++a) {
                    triplets.emplace_back(blk.cols[a], blk.cols[b], 0.0);
                }
            }
        }
        K_.resize(dim, dim);
        K_.setFromTriplets(triplets.begin(), triplets.end());
        K_.makeCompressed();
        base_.assign(K_.valuePtr(), K_.valuePtr() + K_.nonZeros());
        for (Block& blk : blocks_) {
            if (blk.kept >= 0) {
                for (std::size_t c = 0; c < blk.cols.size(); ++c) {
                    for (int r = 0; r < blk.dim; ++r) {
                        blk.slots.push_back(static_cast<int>(&K_.coeffRef(blk.cols[c], blk.kept + r) - K_.valuePtr()));
                    }
                }
                continue;
            }
            for (std::size_t b = 0; b < blk.cols.size(); ++b) {
                for (std::size_t a = 0; a <= b; ++a) {
                    blk.slots.push_back(static_cast<int>(&K_.coeffRef(blk.cols[a], blk.cols[b]) - K_.valuePtr()));
                }
            }
        }
        for (int j = 0; j < n_; ++j) {
            diag_slots_.push_back(static_cast<int>(&K_.coeffRef(j, j) - K_.valuePtr()));
        }
        Vector signs(dim);
        signs << Vector::Ones(n_), -Vector::Ones(p_ + kept);
        ldl_.analyze(K_, signs);
        A_ = A;
    }

    bool factor(const NtScaling& scaling) {
        scaling_ = &scaling;
        double* values = K_.valuePtr();
        std::copy(base_.begin(), base_.end(), values);
        for (Block& blk : blocks_) {
            blk.scaled = apply_block(blk, blk.g, true);
            if (blk.kept >= 0) {
                std::size_t slot = 0;
                for (Eigen::Index c = 0; c < blk.scaled.cols(); ++c) {
                    for (Eigen::Index r = 0; r < blk.scaled.rows(); ++r) {
                        values[blk.slots[slot++]] = blk.scaled(r, c);
                    }
                }
                continue;
            }
            const Eigen::MatrixXd gram = blk.scaled.transpose() * blk.scaled;
            std::size_t slot = 0;
            for (Eigen::Index b = 0; b < gram.cols(); ++b) {
                for (Eigen::Index a = 0; a <= b; ++a) {
                    values[blk.slots[slot++]] += gram(a, b);
                }
            }
        }
        for (int slot : diag_slots_) {
            values[slot] += kReg;
        }
        return ldl_.factor(values, kEps, kDelta);
    }

    /// Solves the unscaled system for (x, y, z).
    Vector solve(const Vector& rhs) const {
        // scaled right-hand side: (rx, ry, W^-1 rz); unknowns (x, y, W z)
        Vector scaled_rhs = rhs;
        scaled_rhs.tail(m_) = scaling_->apply(cones_, rhs.tail(m_), true);
        // per-block relative error, so a large z part cannot hide an inaccurate x or y part
        const std::array<double, 3> scale{1.0 + scaled_rhs.head(n_).lpNorm<Eigen::Infinity>(),
                                          1.0 + scaled_rhs.segment(n_, p_).lpNorm<Eigen::Infinity>(),
                                          1.0 + scaled_rhs.tail(m_).lpNorm<Eigen::Infinity>()};
        auto measure = [&](const Vector& r) {
            double e = r.head(n_).lpNorm<Eigen::Infinity>() / scale[0];
            if (p_ > 0) e = std::max(e, r.segment(n_, p_).lpNorm<Eigen::Infinity>() / scale[1]);
            if (m_ > 0) e = std::max(e, r.tail(m_).lpNorm<Eigen::Infinity>() / scale[2]);
            return e;
        };
        Vector sol = reduced_solve(scaled_rhs);
        Vector residual = scaled_rhs - multiply(sol);
        double error = measure(residual);
        for (int refine = 0; refine < 10 && error > 1e-14; ++refine) {
            const Vector trial = sol + reduced_solve(residual);
            Vector trial_residual = scaled_rhs - multiply(trial);
            const double trial_error = measure(trial_residual);
            // keep the best iterate; stop once refinement no longer pays
            if (!(trial_error < error)) {
                break;
            }
            const bool slow = trial_error > 0.5 * error;
            sol = trial;
            residual = std::move(trial_residual);
            error = trial_error;
            if (slow) {
                break;
            }
        }
        last_residual = error;
        sol.tail(m_) = scaling_->apply(cones_, sol.tail(m_), true);
        return sol;
    }

    mutable double last_residual = 0.0;

private:
    struct Block {
        int row = 0;
        int dim = 0;
        int cone = -1;  // -1 for an orthant row
        int kept = -1;  // first K row of z~ when the block is not eliminated
        std::vector<int> cols;
        Eigen::MatrixXd g;
        Eigen::MatrixXd scaled;  // W^-1 g at the current scaling
        std::vector<int> slots;  // K value index of each gram(a, b), a <= b, or of scaled(r, c) when kept
    };

    Eigen::MatrixXd apply_block(const Block& blk, const Eigen::MatrixXd& u, bool inverse) const {
        if (blk.cone < 0) {
            const double w = scaling_->orthant_w(blk.row);
            return inverse ? Eigen::MatrixXd(u / w) : Eigen::MatrixXd(u * w);
        }
        Eigen::MatrixXd out(u.rows(), u.cols());
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            out.col(c) = scaling_->apply_cone(cones_, static_cast<std::size_t>(blk.cone), u.col(c), inverse);
        }
        return out;
    }

    Vector gt_times(const Vector& zs, bool eliminated_only = false) const {
        Vector out = Vector::Zero(n_);
        for (const Block& blk : blocks_) {
            if (eliminated_only && blk.kept >= 0) {
                continue;
            }
            const Vector part = blk.scaled.transpose() * zs.segment(blk.row, blk.dim);
            for (std::size_t c = 0; c < blk.cols.size(); ++c) {
                out(blk.cols[c]) += part(static_cast<Eigen::Index>(c));
            }
        }
        return out;
    }

    Vector g_times(const Vector& x) const {
        Vector out(m_);
        for (const Block& blk : blocks_) {
            Vector xs(static_cast<Eigen::Index>(blk.cols.size()));
            for (std::size_t c = 0; c < blk.cols.size(); ++c) {
                xs(static_cast<Eigen::Index>(c)) = x(blk.cols[c]);
            }
            out.segment(blk.row, blk.dim) = blk.scaled * xs;
        }
        return out;
    }

    /// Scaled system [0 A' G~'; A 0 0; G~ 0 -I] through the reduced factor.
    Vector reduced_solve(const Vector& r) const {
        Vector reduced = Vector::Zero(K_.rows());
        reduced.head(n_) = r.head(n_) + gt_times(r.tail(m_), true);
        reduced.segment(n_, p_) = r.segment(n_, p_);
        for (const Block& blk : blocks_) {
            if (blk.kept >= 0) {
                reduced.segment(blk.kept, blk.dim) = r.segment(n_ + p_ + blk.row, blk.dim);
            }
        }
        const Vector sol = ldl_.solve(reduced);
        Vector out(n_ + p_ + m_);
        out << sol.head(n_ + p_), g_times(sol.head(n_)) - r.tail(m_);
        for (const Block& blk : blocks_) {
            if (blk.kept >= 0) {
                out.segment(n_ + p_ + blk.row, blk.dim) = sol.segment(blk.kept, blk.dim);
            }
        }
        return out;
    }

    /// Unregularized scaled matrix times (x, y, z~).
    Vector multiply(const Vector& v) const {
        const auto x = v.head(n_);
        const auto y = v.segment(n_, p_);
        const Vector zs = v.tail(m_);
        Vector out(n_ + p_ + m_);
        out << A_.transpose() * y + gt_times(zs), A_ * x, g_times(x) - zs;
        return out;
    }

    static constexpr double kReg = 1e-8;   // static
    static constexpr double kEps = 1e-13;  // dynamic pivot threshold
    static constexpr double kDelta = 7e-8; // dynamic pivot replacement
    static constexpr std::size_t kWideBlock = 48;

    const Cones& cones_;
    int n_ = 0;
    int p_ = 0;
    int m_ = 0;
    std::vector<Block> blocks_;
    SparseMatrix A_;
    SparseMatrix K_;
    std::vector<double> base_;
    std::vector<int> diag_slots_;
    const NtScaling* scaling_ = nullptr;
    QuasiDefiniteLdl ldl_;
};

struct Equilibration {
    Vector col;    // x = col .* x_scaled
    Vector row_a;  // rows of A
    Vector row_g;  // rows of G, uniform within each cone
    double cost = 1.0;
};

Equilibration equilibrate(SparseMatrix& A, SparseMatrix& G, const Cones& cones, bool enabled) {
    const int n = static_cast<int>(A.cols());
    Equilibration eq{Vector::Ones(n), Vector::Ones(A.rows()), Vector::Ones(G.rows()), 1.0};
    if (!enabled) {
        return eq;
    }
    auto clamp_norm = [](double v) { return v < 1e-8 ? 1.0 : std::clamp(v, 1e-4, 1e4); };
    for (int pass = 0; pass < 12; ++pass) {
        Vector col_max = Vector::Zero(n);
        Vector ra = Vector::Zero(A.rows());
        Vector rg = Vector::Zero(G.rows());
        for (int j = 0; j < n; ++j) {
            for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
                col_max(j) = std::max(col_max(j), std::abs(it.value()));
                ra(it.row()) = std::max(ra(it.row()), std::abs(it.value()));
            }
            for (SparseMatrix::InnerIterator it(G, j); it; ++it) {
                col_max(j) = std::max(col_max(j), std::abs(it.value()));
                rg(it.row()) = std::max(rg(it.row()), std::abs(it.value()));
            }
        }
        for (std::size_t k = 0; k < cones.soc_dims().size(); ++k) {
            const int o = cones.soc_offsets()[k];
            const int d = cones.soc_dims()[k];
            rg.segment(o, d).setConstant(rg.segment(o, d).maxCoeff());
        }
        Vector dc(n);
        Vector da(A.rows());
        Vector dg(G.rows());
        for (int j = 0; j < n; ++j) dc(j) = 1.0 / std::sqrt(clamp_norm(col_max(j)));
        for (Eigen::Index i = 0; i < ra.size(); ++i) da(i) = 1.0 / std::sqrt(clamp_norm(ra(i)));
        for (Eigen::Index i = 0; i < rg.size(); ++i) dg(i) = 1.0 / std::sqrt(clamp_norm(rg(i)));
        A = da.asDiagonal() * A * dc.asDiagonal();
        G = dg.asDiagonal() * G * dc.asDiagonal();
        eq.col.array() *= dc.array();
        eq.row_a.array() *= da.array();
        eq.row_g.array() *= dg.array();
        if ((col_max.array() - 1.0).abs().maxCoeff() < 0.1 && (ra.size() == 0 || (ra.array() - 1.0).abs().maxCoeff() < 0.1)) {
            break;
        }
    }
    return eq;
}

} // namespace

Solution solve(const Program& program, const Settings& settings) {
    Solution result;
    const Cones cones(program.cones);
    const int n = program.variables();
    const int p = static_cast<int>(program.A.rows());
    const int m = static_cast<int>(program.G.rows());
    if (program.A.cols() != n || program.G.cols() != n || program.b.size() != p || program.h.size() != m ||
        cones.rows() != m) {
        result.status = Status::numerical_failure;
        return result;
    }

    SparseMatrix A = program.A;
    SparseMatrix G = program.G;
    const Equilibration eq = equilibrate(A, G, cones, settings.equilibrate);
    Vector c = eq.col.cwiseProduct(program.c);
    double cost_scale = c.lpNorm<Eigen::Infinity>();
    cost_scale = cost_scale > 0.0 ? cost_scale : 1.0;
    c /= cost_scale;
    const Vector b = eq.row_a.cwiseProduct(program.b);
    const Vector h = eq.row_g.cwiseProduct(program.h);

    Kkt kkt(A, G, cones);
    NtScaling scaling;

    // initial point: W = I
    scaling.orthant_w = Vector::Ones(cones.orthant());
    scaling.eta.assign(cones.soc_dims().size(), 1.0);
    scaling.wbar.assign(static_cast<std::size_t>(m - cones.orthant()), 0.0);
    for (int o : cones.soc_offsets()) {
        scaling.wbar[static_cast<std::size_t>(o - cones.orthant())] = 1.0;
    }
    if (!kkt.factor(scaling)) {
        result.status = Status::numerical_failure;
        return result;
    }
    const int dim = n + p + m;
    auto stack = [&](const Vector& rx, const Vector& ry, const Vector& rz) {
        Vector rhs(dim);
        rhs << rx, ry, rz;
        return rhs;
    };
    Vector x, y, z, s;
    {
        const Vector primal = kkt.solve(stack(Vector::Zero(n), b, h));
        x = primal.head(n);
        s = -primal.tail(m);
        const double margin = cones.min_margin(s);
        if (margin < 1.0) cones.add_identity(s, 1.0 - margin);
        const Vector dual = kkt.solve(stack(-c, Vector::Zero(p), Vector::Zero(m)));
        y = dual.segment(n, p);
        z = dual.tail(m);
        const double dmargin = cones.min_margin(z);
        if (dmargin < 1.0) cones.add_identity(z, 1.0 - dmargin);
    }
    double tau = 1.0;
    double kappa = 1.0;

    const double bnorm = std::max(1.0, b.norm());
    const double hnorm = std::max(1.0, h.norm());
    const double cnorm = std::max(1.0, c.norm());
    const SparseMatrix At = A.transpose();
    const SparseMatrix Gt = G.transpose();
    const double degree = cones.degree() + 1.0;
    const Vector e = cones.identity();

    Status status = Status::iteration_limit;
    int iter = 0;
    double pres = 0.0, dres = 0.0, relgap = 0.0;
    for (;; ++iter) {
        const Vector Aty_Gtz = At * y + Gt * z;
        const Vector Ax = A * x;
        const Vector Gx = G * x;
        const Vector rx = Aty_Gtz + c * tau;
        const Vector ry = -Ax + b * tau;
        const Vector rz = -Gx + h * tau - s;
        const double cx = c.dot(x);
        const double by_hz = b.dot(y) + h.dot(z);
        const double rt = -cx - by_hz - kappa;
        const double mu = (s.dot(z) + tau * kappa) / degree;

        pres = std::max(ry.norm() / (tau * bnorm), rz.norm() / (tau * hnorm));
        dres = rx.norm() / (tau * cnorm);
        const double pcost = cx / tau;
        const double dcost = -by_hz / tau;
        const double gap = s.dot(z) / (tau * tau);
        relgap = gap / std::max({std::abs(pcost), std::abs(dcost), 1.0});

        if (settings.verbose) {
            std::fprintf(stderr, "%3d pcost %+.6e dcost %+.6e gap %.2e pres %.2e dres %.2e k/t %.2e mu %.2e\n", iter, pcost,
                         dcost, gap, pres, dres, kappa / tau, mu);
        }
        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(mu)) {
            status = Status::numerical_failure;
            break;
        }
        if (pres < settings.feas_tol && dres < settings.feas_tol && (gap < settings.abs_tol || relgap < settings.opt_tol)) {
            status = Status::optimal;
            break;
        }
        if (by_hz < 0.0 && Aty_Gtz.norm() < settings.feas_tol * (-by_hz) * cnorm) {
            status = Status::infeasible;
            break;
        }
        if (cx < 0.0 && std::max(Ax.norm(), (Gx + s).norm()) < settings.feas_tol * (-cx) * std::max(bnorm, hnorm)) {
            status = Status::unbounded;
            break;
        }
        if (iter >= settings.max_iter) {
            status = Status::iteration_limit;
            break;
        }

        scaling.compute(cones, s, z);
        if (settings.verbose) {
            const bool ok = scaling.lambda.allFinite() && scaling.orthant_w.allFinite() &&
                            Eigen::Map<const Vector>(scaling.wbar.data(), static_cast<Eigen::Index>(scaling.wbar.size())).allFinite();
            std::fprintf(stderr, "    scaling %s s_margin %.2e z_margin %.2e tau %.2e\n", ok ? "ok" : "NONFINITE", cones.min_margin(s),
                         cones.min_margin(z), tau);
        }
        if (!kkt.factor(scaling)) {
            status = Status::numerical_failure;
            break;
        }
        const Vector& lambda = scaling.lambda;
        const Vector v = kkt.solve(stack(-c, b, h));
        const auto vx = v.head(n);
        const auto vy = v.segment(n, p);
        const auto vz = v.tail(m);
        const double denom_base = scaling.apply(cones, vz, false).squaredNorm();

        struct Direction {
            Vector dx, dy, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        auto direction = [&](double eta, const Vector& ds_rhs, double dk) {
            const Vector wdiv = scaling.apply(cones, cones.divide(lambda, ds_rhs), false);
            const Vector u = kkt.solve(stack(-eta * rx, eta * ry, eta * rz + wdiv));
            const auto ux = u.head(n);
            const auto uy = u.segment(n, p);
            const auto uz = u.tail(m);
            Direction d;
            d.dtau = (-eta * rt - dk / tau + c.dot(ux) + b.dot(uy) + h.dot(uz)) / (kappa / tau + denom_base);
            d.dx = ux + d.dtau * vx;
            d.dy = uy + d.dtau * vy;
            d.dz = uz + d.dtau * vz;
            // from the linearized cone equality rather than through W, which loses accuracy near the boundary
            d.ds = eta * rz + d.dtau * h - G * d.dx;
            d.dkappa = -(dk + kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Direction& d) {
            double alpha = std::min(cones.max_step(s, d.ds), cones.max_step(z, d.dz));
            if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
            if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
            return alpha;
        };

        const Vector lambda_sq = cones.product(lambda, lambda);
        const Direction affine = direction(1.0, lambda_sq, kappa * tau);
        const double alpha_aff = std::min(1.0, step_to_boundary(affine));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 1e-4, 1.0);

        const Vector corr = cones.product(scaling.apply(cones, affine.ds, true), scaling.apply(cones, affine.dz, false));
        const Vector ds_comb = lambda_sq + corr - sigma * mu * e;
        const double dk_comb = kappa * tau + affine.dkappa * affine.dtau - sigma * mu;
        const Direction comb = direction(1.0 - sigma, ds_comb, dk_comb);
        double alpha = std::min(1.0, 0.99 * step_to_boundary(comb));
        // rounding can still put the new point on the boundary
        while (alpha > 1e-12 && !(cones.min_margin(s + alpha * comb.ds) > 0.0 && cones.min_margin(z + alpha * comb.dz) > 0.0)) {
            alpha *= 0.5;
        }
        if (settings.verbose) {
            std::fprintf(stderr, "    sigma %.2e alpha_aff %.2e alpha %.2e kkt_res %.2e\n", sigma, alpha_aff, alpha, kkt.last_residual);
        }
        if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
            status = Status::numerical_failure;
            break;
        }
        x += alpha * comb.dx;
        y += alpha * comb.dy;
        z += alpha * comb.dz;
        s += alpha * comb.ds;
        tau += alpha * comb.dtau;
        kappa += alpha * comb.dkappa;
    }

    result.status = status;
    result.iterations = iter;
    result.primal_residual = pres;
    result.dual_residual = dres;
    result.relative_gap = relgap;
    if (status == Status::infeasible) {
        // certificate (y, z), normalized
        const double scale = -(b.dot(y) + h.dot(z));
        result.y = eq.row_a.cwiseProduct(y) / scale;
        result.z = eq.row_g.cwiseProduct(z) / scale;
        result.x = Vector::Zero(n);
        result.s = Vector::Zero(m);
        return result;
    }
    result.x = eq.col.cwiseProduct(x) / tau;
    result.y = eq.row_a.cwiseProduct(y) * (cost_scale / tau);
    result.z = eq.row_g.cwiseProduct(z) * (cost_scale / tau);
    result.s = s.cwiseQuotient(eq.row_g) / tau;
    result.primal_objective = program.c.dot(result.x);
    result.dual_objective = -(program.b.dot(result.y) + program.h.dot(result.z));
    return result;
}

} // namespace rhotraj::conic
