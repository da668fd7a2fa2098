#pragma once

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace phasefrac {

struct Triplet
{
    index_t row;
    index_t col;
    double value;
};

/// Square matrix in compressed-row storage with sorted, unique columns per row.
class SparseMatrix
{
public:
    SparseMatrix() = default;

    SparseMatrix(std::size_t n, std::vector<std::size_t> row_offsets, std::vector<index_t> cols,
                 std::vector<double> values)
        : n_(n), offsets_(std::move(row_offsets)), cols_(std::move(cols)), values_(std::move(values))
    {
    }

    std::size_t n_rows() const { return n_; }
    std::size_t n_cols() const { return n_; }
    std::size_t nnz() const { return values_.size(); }

    const std::vector<std::size_t> &row_offsets() const { return offsets_; }
    const std::vector<index_t> &col_indices() const { return cols_; }
    const std::vector<double> &values() const { return values_; }
    std::vector<double> &values() { return values_; }

    /// Entry (i, j); zero when not stored.
    double operator()(index_t i, index_t j) const
    {
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
        const auto it = std::lower_bound(first, last, j);
        return (it != last && *it == j) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
    }

    void multiply(std::span<const double> x, std::span<double> y) const
    {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k)
                s += values_[k] * x[cols_[k]];
            y[i] = s;
        }
    }

    std::vector<double> operator*(std::span<const double> x) const
    {
        std::vector<double> y(n_);
        multiply(x, y);
        return y;
    }

    std::vector<double> diagonal() const
    {
        std::vector<double> d(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            d[i] = (*this)(static_cast<index_t>(i), static_cast<index_t>(i));
        return d;
    }

    /// max |A(i,j) - A(j,i)| <= tol * max |A(i,j)|
    bool is_symmetric(double tol = 1e-12) const
    {
        double amax = 0.0;
        for (double v : values_)
            amax = std::max(amax, std::abs(v));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
                const double t = (*this)(cols_[k], static_cast<index_t>(i));
                if (std::abs(values_[k] - t) > tol * amax)
                    return false;
            }
        return true;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<index_t> cols_;
    std::vector<double> values_;
};

/// Builds an n x n matrix, summing duplicates and dropping exact zeros.
inline SparseMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets)
{
    for (const auto &t : triplets)
        if (t.row < 0 || t.col < 0 || static_cast<std::size_t>(t.row) >= n || static_cast<std::size_t>(t.col) >= n)
            throw Error(ErrorCategory::invalid_argument, "from_triplets: index out of range");
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet &a, const Triplet &b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<index_t> cols;
    std::vector<double> vals;
    for (std::size_t i = 0; i < triplets.size();) {
        std::size_t j = i;
        double s = 0.0;
        while (j < triplets.size() && triplets[j].row == triplets[i].row && triplets[j].col == triplets[i].col)
            s += triplets[j++].value;
        if (s != 0.0) {
            cols.push_back(triplets[i].col);
            vals.push_back(s);
            ++offsets[triplets[i].row + 1];
        }
        i = j;
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return SparseMatrix(n, std::move(offsets), std::move(cols), std::move(vals));
}

/**
 * Fixed sparsity pattern of a finite element operator with a precomputed
 * slot for every (element, local row, local col) entry, so that repeated
 * assembly on the same mesh is a plain scatter in element order.
 */
class AssemblyPattern
{
public:
    AssemblyPattern() = default;

    /// `element_dofs` holds `dofs_per_element` global indices per element.
    AssemblyPattern(std::size_t n, std::span<const index_t> element_dofs, int dofs_per_element)
        : n_(n), local_(dofs_per_element)
    {
        const std::size_t n_el = element_dofs.size() / local_;
        std::vector<std::pair<index_t, index_t>> entries;
        entries.reserve(n_el * local_ * local_);
        for (std::size_t e = 0; e < n_el; ++e)
            for (int a = 0; a < local_; ++a)
                for (int b = 0; b < local_; ++b)
                    entries.emplace_back(element_dofs[e * local_ + a], element_dofs[e * local_ + b]);
        std::sort(entries.begin(), entries.end());
        entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
        offsets_.assign(n + 1, 0);
        cols_.resize(entries.size());
        for (std::size_t k = 0; k < entries.size(); ++k) {
            ++offsets_[entries[k].first + 1];
            cols_[k] = entries[k].second;
        }
        std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
        slots_.resize(n_el * local_ * local_);
        for (std::size_t e = 0; e < n_el; ++e)
            for (int a = 0; a < local_; ++a) {
                const index_t row = element_dofs[e * local_ + a];
                const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[row]);
                const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[row + 1]);
                for (int b = 0; b < local_; ++b) {
                    const auto it = std::lower_bound(first, last, element_dofs[e * local_ + b]);
                    slots_[(e * local_ + a) * local_ + b] = static_cast<std::uint32_t>(it - cols_.begin());
                }
            }
    }

    std::size_t n() const { return n_; }
    int dofs_per_element() const { return local_; }

    /// Assembles; `element_matrix(e, span)` fills a row-major local matrix.
    template <class F>
    SparseMatrix assemble(std::size_t n_elements, F &&element_matrix) const
    {
        std::vector<double> values(cols_.size(), 0.0);
        std::vector<double> ke(static_cast<std::size_t>(local_) * local_);
        for (std::size_t e = 0; e < n_elements; ++e) {
            std::fill(ke.begin(), ke.end(), 0.0);
            element_matrix(e, std::span<double>(ke));
            const std::size_t base = e * local_ * local_;
            for (std::size_t k = 0; k < ke.size(); ++k)
                values[slots_[base + k]] += ke[k];
        }
        return SparseMatrix(n_, offsets_, cols_, std::move(values));
    }

private:
    std::size_t n_ = 0;
    int local_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<index_t> cols_;
    std::vector<std::uint32_t> slots_;
};

struct CgResult
{
    std::vector<double> x;
    std::size_t iterations = 0;
    bool converged = false;
    double relative_residual = 0.0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace detail

/// amg: smoothed-aggregation multigrid, see amg.hpp (needs a near-nullspace).
enum class Preconditioner { jacobi, ic0, amg };

/**
 * Zero fill-in incomplete Cholesky factor L (lower triangle, CSR) of a
 * symmetric matrix. If a pivot breaks down the factorization restarts on
 * A + alpha diag(A) with growing alpha.
 */
class IncompleteCholesky
{
public:
    explicit IncompleteCholesky(const SparseMatrix &a) : n_(a.n_rows())
    {
        const auto &off = a.row_offsets();
        const auto &cols = a.col_indices();
        const auto &vals = a.values();
        offsets_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t cnt = 0;
            for (std::size_t k = off[i]; k < off[i + 1]; ++k)
                cnt += static_cast<std::size_t>(cols[k]) <= i;
            offsets_[i + 1] = offsets_[i] + cnt;
        }
        cols_.resize(offsets_[n_]);
        std::vector<double> lower(offsets_[n_]);
        for (std::size_t i = 0, p = 0; i < n_; ++i)
            for (std::size_t k = off[i]; k < off[i + 1]; ++k)
                if (static_cast<std::size_t>(cols[k]) <= i) {
                    cols_[p] = cols[k];
                    lower[p++] = vals[k];
                }
        for (std::size_t i = 0; i < n_; ++i)
            if (offsets_[i + 1] == offsets_[i] || static_cast<std::size_t>(cols_[offsets_[i + 1] - 1]) != i)
                throw Error(ErrorCategory::solver, "incomplete Cholesky: missing diagonal in row " + std::to_string(i));
        for (double alpha = 0.0;; alpha = alpha == 0.0 ? 1e-3 : 2.0 * alpha) {
            if (factor(lower, alpha))
                break;
            if (alpha > 1e3)
                throw Error(ErrorCategory::solver, "incomplete Cholesky: factorization failed");
        }
    }

    /// z = (L L^T)^{-1} r
    void apply(std::span<const double> r, std::span<double> z) const
    {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = r[i];
            const std::size_t last = offsets_[i + 1] - 1;
            for (std::size_t k = offsets_[i]; k < last; ++k)
                s -= l_[k] * z[cols_[k]];
            z[i] = s / l_[last];
        }
        for (std::size_t i = n_; i-- > 0;) {
            const std::size_t last = offsets_[i + 1] - 1;
            z[i] /= l_[last];
            for (std::size_t k = offsets_[i]; k < last; ++k)
                z[cols_[k]] -= l_[k] * z[i];
        }
    }

private:
    bool factor(const std::vector<double> &lower, double alpha)
    {
        l_ = lower;
        for (std::size_t i = 0; i < n_; ++i)
            l_[offsets_[i + 1] - 1] *= 1.0 + alpha;
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t first = offsets_[i], last = offsets_[i + 1] - 1;
            for (std::size_t p = first; p <= last; ++p) {
                const auto k = static_cast<std::size_t>(cols_[p]);
                // sparse dot of rows i and k over columns < k
                double s = l_[p];
                std::size_t a = first, b = offsets_[k];
                const std::size_t bend = offsets_[k + 1] - 1;
                while (a < p && b < bend) {
                    if (cols_[a] < cols_[b])
                        ++a;
                    else if (cols_[a] > cols_[b])
                        ++b;
                    else
                        s -= l_[a++] * l_[b++];
                }
                if (k < i) {
                    l_[p] = s / l_[bend];
                } else {
                    if (!(s > 0.0))
                        return false;
                    l_[p] = std::sqrt(s);
                }
            }
        }
        return true;
    }

    std::size_t n_;
    std::vector<std::size_t> offsets_;
    std::vector<index_t> cols_;
    std::vector<double> l_;
};

namespace detail {

/// Preconditioned CG core; `precondition(r, z)` applies z = M^-1 r.
template <class Precondition>
CgResult pcg(const SparseMatrix &a, std::span<const double> b, double tol, std::size_t max_iter,
             std::span<const double> x0, Precondition &&precondition)
{
    const std::size_t n = a.n_rows();
    if (b.size() != n || (!x0.empty() && x0.size() != n))
        throw Error(ErrorCategory::invalid_argument, "cg_solve: size mismatch");
    if (!(tol > 0.0))
        throw Error(ErrorCategory::invalid_argument, "cg_solve: tolerance must be positive");
    if (max_iter == 0)
        max_iter = 10 * n;
    CgResult res;
    res.x.assign(n, 0.0);
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    if (!x0.empty())
        std::copy(x0.begin(), x0.end(), res.x.begin());
    std::vector<double> r(n), z(n), p(n), q(n);
    a.multiply(res.x, q);
    for (std::size_t i = 0; i < n; ++i)
        r[i] = b[i] - q[i];
    double rnorm = std::sqrt(dot(r, r));
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    while (rnorm > tol * bnorm && res.iterations < max_iter) {
        a.multiply(p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        ++res.iterations;
        rnorm = std::sqrt(dot(r, r));
        precondition(r, z);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    res.relative_residual = rnorm / bnorm;
    res.converged = rnorm <= tol * bnorm;
    return res;
}

} // namespace detail

/**
 * Preconditioned conjugate gradients for symmetric positive definite A,
 * Jacobi by default. Stops when ||b - A x|| <= tol ||b||; non-convergence
 * is reported through CgResult::converged. A zero diagonal entry throws.
 * `max_iter` == 0 means 10 n.
 */
inline CgResult cg_solve(const SparseMatrix &a, std::span<const double> b, double tol = 1e-10,
                         std::size_t max_iter = 0, std::span<const double> x0 = {},
                         Preconditioner pc = Preconditioner::jacobi)
{
    const std::size_t n = a.n_rows();
    if (b.size() != n)
        throw Error(ErrorCategory::invalid_argument, "cg_solve: size mismatch");
    std::vector<double> inv_diag = a.diagonal();
    for (std::size_t i = 0; i < n; ++i) {
        if (inv_diag[i] == 0.0)
            throw Error(ErrorCategory::solver, "cg_solve: zero diagonal entry in row " + std::to_string(i));
        inv_diag[i] = 1.0 / inv_diag[i];
    }
    if (pc == Preconditioner::amg)
        throw Error(ErrorCategory::invalid_argument, "cg_solve: multigrid needs a prebuilt AmgPreconditioner");
    if (pc == Preconditioner::ic0) {
        const IncompleteCholesky ic(a);
        return detail::pcg(a, b, tol, max_iter, x0,
                           [&](const std::vector<double> &r, std::vector<double> &z) { ic.apply(r, z); });
    }
    return detail::pcg(a, b, tol, max_iter, x0, [&](const std::vector<double> &r, std::vector<double> &z) {
        for (std::size_t i = 0; i < n; ++i)
            z[i] = inv_diag[i] * r[i];
    });
}

/// Prescribed values for a subset of unknowns, sorted by dof without duplicates.
using Constraints = std::vector<std::pair<index_t, double>>;

/**
 * Symmetric elimination of prescribed values g: b <- b - A g on free rows,
 * constrained rows and columns zeroed with a unit diagonal and b_i = g_i.
 * Works in place; constrained diagonals must be in the sparsity pattern.
 */
inline void apply_dirichlet(SparseMatrix &a, std::vector<double> &b, const Constraints &constrained)
{
    const std::size_t n = a.n_rows();
    std::vector<char> is_fixed(n, 0);
    std::vector<double> g(n, 0.0);
    for (const auto &[dof, value] : constrained) {
        is_fixed[dof] = 1;
        g[dof] = value;
    }
    const auto &off = a.row_offsets();
    const auto &cols = a.col_indices();
    auto &vals = a.values();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
            const auto j = static_cast<std::size_t>(cols[k]);
            if (is_fixed[i]) {
                vals[k] = (i == j) ? 1.0 : 0.0;
            } else if (is_fixed[j]) {
                b[i] -= vals[k] * g[j];
                vals[k] = 0.0;
            }
        }
    }
    for (const auto &[dof, value] : constrained)
        b[dof] = value;
    for (const auto &[dof, value] : constrained)
        if (a(dof, dof) != 1.0)
            throw Error(ErrorCategory::invalid_argument, "apply_dirichlet: constrained diagonal not in pattern");
}

} // namespace phasefrac
