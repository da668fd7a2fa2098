#pragma once

#include "sparse.hpp"

#include <memory>

namespace phasefrac {

struct AmgOptions
{
    double strength = 0.08;        ///< block strength-of-connection threshold
    std::size_t coarse_size = 300; ///< stop coarsening at or below this many unknowns
    int max_levels = 12;
};

namespace detail {

/// Rectangular compressed-row matrix used inside the multigrid hierarchy.
struct Csr
{
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> off{0};
    std::vector<index_t> idx;
    std::vector<double> val;

    void multiply(std::span<const double> x, std::span<double> y) const
    {
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t k = off[i]; k < off[i + 1]; ++k)
                s += val[k] * x[idx[k]];
            y[i] = s;
        }
    }
};

inline Csr to_csr(const SparseMatrix &a)
{
    Csr c;
    c.rows = c.cols = a.n_rows();
    c.off = a.row_offsets();
    c.idx = a.col_indices();
    c.val = a.values();
    return c;
}

inline Csr transpose(const Csr &a)
{
    Csr t;
    t.rows = a.cols;
    t.cols = a.rows;
    t.off.assign(t.rows + 1, 0);
    for (index_t j : a.idx)
        ++t.off[j + 1];
    std::partial_sum(t.off.begin(), t.off.end(), t.off.begin());
    t.idx.resize(a.idx.size());
    t.val.resize(a.val.size());
    auto fill = t.off;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k) {
            const auto p = fill[a.idx[k]]++;
            t.idx[p] = static_cast<index_t>(i);
            t.val[p] = a.val[k];
        }
    return t;
}

/// C = A B with sorted column indices.
inline Csr multiply(const Csr &a, const Csr &b)
{
    Csr c;
    c.rows = a.rows;
    c.cols = b.cols;
    c.off.assign(a.rows + 1, 0);
    std::vector<index_t> marker(b.cols, -1);
    std::vector<double> acc(b.cols, 0.0);
    std::vector<index_t> row;
    for (std::size_t i = 0; i < a.rows; ++i) {
        row.clear();
        for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k) {
            const double av = a.val[k];
            const auto j = a.idx[k];
            for (std::size_t q = b.off[j]; q < b.off[j + 1]; ++q) {
                const auto col = b.idx[q];
                if (marker[col] != static_cast<index_t>(i)) {
                    marker[col] = static_cast<index_t>(i);
                    acc[col] = 0.0;
                    row.push_back(col);
                }
                acc[col] += av * b.val[q];
            }
        }
        std::sort(row.begin(), row.end());
        for (index_t col : row) {
            c.idx.push_back(col);
            c.val.push_back(acc[col]);
        }
        c.off[i + 1] = c.idx.size();
    }
    return c;
}

} // namespace detail

/**
 * Smoothed-aggregation algebraic multigrid, applied as one symmetric
 * V(1,1)-cycle with Gauss-Seidel smoothing (forward before, backward after
 * the coarse correction). Unknowns come in blocks of `block` per node; the
 * near-nullspace (nb columns, row-major n x nb) seeds the tentative
 * prolongators, e.g. rigid body modes for elasticity.
 */
class AmgPreconditioner
{
public:
    AmgPreconditioner(const SparseMatrix &a, int block, std::vector<double> nullspace, int nb,
                      const AmgOptions &opt = {})
    {
        if (block < 1 || nb < 1 || a.n_rows() % static_cast<std::size_t>(block) != 0 ||
            nullspace.size() != a.n_rows() * static_cast<std::size_t>(nb))
            throw Error(ErrorCategory::invalid_argument, "AmgPreconditioner: inconsistent block structure");
        levels_.emplace_back();
        levels_[0].a = detail::to_csr(a);
        std::vector<double> b = std::move(nullspace);
        int bs = block;
        for (int l = 0; l + 1 < opt.max_levels && levels_.back().a.rows > opt.coarse_size; ++l) {
            // Dirichlet rows carry no coarse information
            const auto &al = levels_.back().a;
            for (std::size_t i = 0; i < al.rows; ++i) {
                bool decoupled = true;
                for (std::size_t k = al.off[i]; k < al.off[i + 1]; ++k)
                    if (static_cast<std::size_t>(al.idx[k]) != i && al.val[k] != 0.0)
                        decoupled = false;
                if (decoupled)
                    for (int c = 0; c < nb; ++c)
                        b[i * nb + c] = 0.0;
            }
            std::vector<double> bc;
            auto p = build_prolongator(levels_.back().a, bs, b, nb, opt.strength * std::pow(0.5, l), bc);
            if (p.cols == 0 || p.cols >= levels_.back().a.rows)
                break;
            Level next;
            const auto ap = detail::multiply(levels_.back().a, p);
            levels_.back().r = detail::transpose(p);
            next.a = detail::multiply(levels_.back().r, ap);
            for (std::size_t i = 0; i < next.a.rows; ++i) {
                bool has_diag = false;
                for (std::size_t k = next.a.off[i]; k < next.a.off[i + 1]; ++k)
                    if (static_cast<std::size_t>(next.a.idx[k]) == i && next.a.val[k] != 0.0)
                        has_diag = true;
                if (!has_diag)
                    set_unit_diagonal(next.a, i);
            }
            levels_.back().p = std::move(p);
            levels_.push_back(std::move(next));
            b = std::move(bc);
            bs = nb;
        }
        for (auto &lv : levels_) {
            lv.diag_pos.resize(lv.a.rows);
            for (std::size_t i = 0; i < lv.a.rows; ++i) {
                lv.diag_pos[i] = lv.a.off[i + 1];
                for (std::size_t k = lv.a.off[i]; k < lv.a.off[i + 1]; ++k)
                    if (static_cast<std::size_t>(lv.a.idx[k]) == i)
                        lv.diag_pos[i] = k;
                if (lv.diag_pos[i] == lv.a.off[i + 1] || !(lv.a.val[lv.diag_pos[i]] > 0.0))
                    throw Error(ErrorCategory::solver, "AmgPreconditioner: non-positive diagonal");
            }
            lv.x.resize(lv.a.rows);
            lv.b.resize(lv.a.rows);
            lv.res.resize(lv.a.rows);
        }
        factor_coarse();
    }

    std::size_t n_levels() const { return levels_.size(); }
    std::size_t level_size(std::size_t l) const { return levels_[l].a.rows; }

    void apply(std::span<const double> r, std::span<double> z) const
    {
        auto &top = levels_[0];
        std::copy(r.begin(), r.end(), top.b.begin());
        cycle(0);
        std::copy(top.x.begin(), top.x.end(), z.begin());
    }

private:
    struct Level
    {
        detail::Csr a, p, r;
        std::vector<std::size_t> diag_pos;
        mutable std::vector<double> x, b, res;
    };

    static void set_unit_diagonal(detail::Csr &a, std::size_t i)
    {
        for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k)
            if (static_cast<std::size_t>(a.idx[k]) == i) {
                a.val[k] = 1.0;
                return;
            }
        const auto pos = std::lower_bound(a.idx.begin() + static_cast<std::ptrdiff_t>(a.off[i]),
                                          a.idx.begin() + static_cast<std::ptrdiff_t>(a.off[i + 1]),
                                          static_cast<index_t>(i)) -
                         a.idx.begin();
        a.idx.insert(a.idx.begin() + pos, static_cast<index_t>(i));
        a.val.insert(a.val.begin() + pos, 1.0);
        for (std::size_t k = i + 1; k < a.off.size(); ++k)
            ++a.off[k];
    }

    /// Aggregation on the block graph, tentative prolongator from the local
    /// QR of the near-nullspace, then one damped Jacobi smoothing step.
    static detail::Csr build_prolongator(const detail::Csr &a, int bs, const std::vector<double> &b, int nb,
                                         double theta, std::vector<double> &bc)
    {
        const std::size_t nn = a.rows / bs;
        // block norms
        std::vector<double> dnorm(nn, 0.0);
        std::vector<std::vector<std::pair<index_t, double>>> nbr(nn);
        {
            std::vector<index_t> marker(nn, -1);
            std::vector<double> acc(nn, 0.0);
            std::vector<index_t> touched;
            for (std::size_t I = 0; I < nn; ++I) {
                touched.clear();
                for (int ci = 0; ci < bs; ++ci) {
                    const std::size_t i = I * bs + ci;
                    for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k) {
                        const auto J = a.idx[k] / bs;
                        if (marker[J] != static_cast<index_t>(I)) {
                            marker[J] = static_cast<index_t>(I);
                            acc[J] = 0.0;
                            touched.push_back(J);
                        }
                        acc[J] += a.val[k] * a.val[k];
                    }
                }
                for (index_t J : touched) {
                    if (static_cast<std::size_t>(J) == I)
                        dnorm[I] = std::sqrt(acc[J]);
                    else
                        nbr[I].emplace_back(J, std::sqrt(acc[J]));
                }
            }
        }
        std::vector<std::vector<index_t>> strong(nn);
        std::vector<std::vector<double>> strong_w(nn);
        for (std::size_t I = 0; I < nn; ++I) {
            std::sort(nbr[I].begin(), nbr[I].end());
            for (const auto &[J, s] : nbr[I])
                if (s > 0.0 && s >= theta * std::sqrt(dnorm[I] * dnorm[J])) {
                    strong[I].push_back(J);
                    strong_w[I].push_back(s / std::sqrt(dnorm[I] * dnorm[J]));
                }
        }
        // aggregation
        std::vector<index_t> agg(nn, -1);
        index_t n_agg = 0;
        for (std::size_t I = 0; I < nn; ++I) {
            if (agg[I] >= 0 || strong[I].empty())
                continue;
            bool free = true;
            for (index_t J : strong[I])
                if (agg[J] >= 0)
                    free = false;
            if (!free)
                continue;
            agg[I] = n_agg;
            for (index_t J : strong[I])
                agg[J] = n_agg;
            ++n_agg;
        }
        auto phase1 = agg;
        for (std::size_t I = 0; I < nn; ++I) {
            if (agg[I] >= 0)
                continue;
            double best = -1.0;
            for (std::size_t k = 0; k < strong[I].size(); ++k) {
                const auto J = strong[I][k];
                if (phase1[J] >= 0 && strong_w[I][k] > best) {
                    best = strong_w[I][k];
                    agg[I] = phase1[J];
                }
            }
        }
        for (std::size_t I = 0; I < nn; ++I) {
            if (agg[I] >= 0 || strong[I].empty())
                continue;
            agg[I] = n_agg;
            for (index_t J : strong[I])
                if (agg[J] < 0)
                    agg[J] = n_agg;
            ++n_agg;
        }
        if (n_agg == 0)
            return {};

        // tentative prolongator: local QR of the near-nullspace per aggregate
        std::vector<std::vector<index_t>> members(n_agg);
        for (std::size_t I = 0; I < nn; ++I)
            if (agg[I] >= 0)
                members[agg[I]].push_back(static_cast<index_t>(I));
        std::vector<std::vector<std::pair<index_t, double>>> prow(a.rows);
        bc.assign(static_cast<std::size_t>(n_agg) * nb * nb, 0.0);
        std::vector<double> q;
        for (index_t g = 0; g < n_agg; ++g) {
            std::vector<std::size_t> dofs;
            for (index_t I : members[g])
                for (int c = 0; c < bs; ++c)
                    dofs.push_back(static_cast<std::size_t>(I) * bs + c);
            const std::size_t m = dofs.size();
            q.assign(m * nb, 0.0);
            for (std::size_t r = 0; r < m; ++r)
                for (int c = 0; c < nb; ++c)
                    q[r * nb + c] = b[dofs[r] * nb + c];
            double scale = 0.0;
            for (double v : q)
                scale = std::max(scale, std::abs(v));
            // modified Gram-Schmidt; R stored into the coarse near-nullspace
            for (int c = 0; c < nb; ++c) {
                for (int p = 0; p < c; ++p) {
                    double d = 0.0;
                    for (std::size_t r = 0; r < m; ++r)
                        d += q[r * nb + p] * q[r * nb + c];
                    for (std::size_t r = 0; r < m; ++r)
                        q[r * nb + c] -= d * q[r * nb + p];
                    bc[(static_cast<std::size_t>(g) * nb + p) * nb + c] = d;
                }
                double nrm = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                    nrm += q[r * nb + c] * q[r * nb + c];
                nrm = std::sqrt(nrm);
                if (nrm <= 1e-10 * std::max(scale, 1e-300)) {
                    for (std::size_t r = 0; r < m; ++r)
                        q[r * nb + c] = 0.0;
                    nrm = 0.0;
                } else {
                    for (std::size_t r = 0; r < m; ++r)
                        q[r * nb + c] /= nrm;
                }
                bc[(static_cast<std::size_t>(g) * nb + c) * nb + c] = nrm;
            }
            for (std::size_t r = 0; r < m; ++r)
                for (int c = 0; c < nb; ++c)
                    if (q[r * nb + c] != 0.0)
                        prow[dofs[r]].emplace_back(g * nb + c, q[r * nb + c]);
        }
        detail::Csr pt;
        pt.rows = a.rows;
        pt.cols = static_cast<std::size_t>(n_agg) * nb;
        pt.off.assign(a.rows + 1, 0);
        for (std::size_t i = 0; i < a.rows; ++i) {
            for (const auto &[j, v] : prow[i]) {
                pt.idx.push_back(j);
                pt.val.push_back(v);
            }
            pt.off[i + 1] = pt.idx.size();
        }

        // P = (I - omega D^-1 A) P_tent with omega = 4 / (3 rho(D^-1 A))
        std::vector<double> dinv(a.rows, 0.0);
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k)
                if (static_cast<std::size_t>(a.idx[k]) == i && a.val[k] != 0.0)
                    dinv[i] = 1.0 / a.val[k];
        const double rho = spectral_radius(a, dinv);
        const double omega = 4.0 / (3.0 * rho);
        auto ap = detail::multiply(a, pt);
        for (std::size_t i = 0; i < ap.rows; ++i)
            for (std::size_t k = ap.off[i]; k < ap.off[i + 1]; ++k)
                ap.val[k] *= -omega * dinv[i];
        // add P_tent (both rows sorted)
        detail::Csr p;
        p.rows = a.rows;
        p.cols = pt.cols;
        p.off.assign(a.rows + 1, 0);
        for (std::size_t i = 0; i < a.rows; ++i) {
            std::size_t x = ap.off[i], y = pt.off[i];
            while (x < ap.off[i + 1] || y < pt.off[i + 1]) {
                if (y == pt.off[i + 1] || (x < ap.off[i + 1] && ap.idx[x] < pt.idx[y])) {
                    p.idx.push_back(ap.idx[x]);
                    p.val.push_back(ap.val[x++]);
                } else if (x == ap.off[i + 1] || pt.idx[y] < ap.idx[x]) {
                    p.idx.push_back(pt.idx[y]);
                    p.val.push_back(pt.val[y++]);
                } else {
                    p.idx.push_back(ap.idx[x]);
                    p.val.push_back(ap.val[x++] + pt.val[y++]);
                }
            }
            p.off[i + 1] = p.idx.size();
        }
        return p;
    }

    /// Power iteration estimate of the largest eigenvalue of D^-1 A.
    static double spectral_radius(const detail::Csr &a, const std::vector<double> &dinv)
    {
        std::vector<double> x(a.rows), y(a.rows);
        for (std::size_t i = 0; i < a.rows; ++i)
            x[i] = 1.0 + 0.1 * static_cast<double>((i * 7919) % 13);
        double rho = 1.0;
        for (int it = 0; it < 15; ++it) {
            a.multiply(x, y);
            double ny = 0.0, nx = 0.0;
            for (std::size_t i = 0; i < a.rows; ++i) {
                y[i] *= dinv[i];
                ny += y[i] * y[i];
                nx += x[i] * x[i];
            }
            if (ny == 0.0)
                break;
            rho = std::sqrt(ny / nx);
            const double s = 1.0 / std::sqrt(ny);
            for (std::size_t i = 0; i < a.rows; ++i)
                x[i] = y[i] * s;
        }
        // the estimate approaches rho from below; a margin keeps the smoother stable
        return std::max(1.1 * rho, 1e-300);
    }

    void factor_coarse()
    {
        const auto &a = levels_.back().a;
        const std::size_t n = a.rows;
        chol_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k)
                chol_[i * n + a.idx[k]] = a.val[k];
        for (std::size_t j = 0; j < n; ++j) {
            double d = chol_[j * n + j];
            for (std::size_t k = 0; k < j; ++k)
                d -= chol_[j * n + k] * chol_[j * n + k];
            if (!(d > 1e-14 * std::abs(chol_[j * n + j])))
                d = std::max(std::abs(chol_[j * n + j]), 1e-300); // nearly singular direction: keep it decoupled
            const double ljj = std::sqrt(d);
            chol_[j * n + j] = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = chol_[i * n + j];
                for (std::size_t k = 0; k < j; ++k)
                    s -= chol_[i * n + k] * chol_[j * n + k];
                chol_[i * n + j] = s / ljj;
            }
        }
    }

    void coarse_solve(const Level &lv) const
    {
        const std::size_t n = lv.a.rows;
        auto &x = lv.x;
        for (std::size_t i = 0; i < n; ++i) {
            double s = lv.b[i];
            for (std::size_t k = 0; k < i; ++k)
                s -= chol_[i * n + k] * x[k];
            x[i] = s / chol_[i * n + i];
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t k = i + 1; k < n; ++k)
                s -= chol_[k * n + i] * x[k];
            x[i] = s / chol_[i * n + i];
        }
    }

    static void gauss_seidel(const Level &lv, bool forward)
    {
        const auto &a = lv.a;
        const std::size_t n = a.rows;
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t i = forward ? t : n - 1 - t;
            double s = lv.b[i];
            for (std::size_t k = a.off[i]; k < a.off[i + 1]; ++k)
                s -= a.val[k] * lv.x[a.idx[k]];
            lv.x[i] += s / a.val[lv.diag_pos[i]];
        }
    }

    void cycle(std::size_t l) const
    {
        const auto &lv = levels_[l];
        if (l + 1 == levels_.size()) {
            coarse_solve(lv);
            return;
        }
        std::fill(lv.x.begin(), lv.x.end(), 0.0);
        gauss_seidel(lv, true);
        lv.a.multiply(lv.x, lv.res);
        for (std::size_t i = 0; i < lv.res.size(); ++i)
            lv.res[i] = lv.b[i] - lv.res[i];
        const auto &next = levels_[l + 1];
        lv.r.multiply(lv.res, next.b);
        cycle(l + 1);
        lv.p.multiply(next.x, lv.res);
        for (std::size_t i = 0; i < lv.x.size(); ++i)
            lv.x[i] += lv.res[i];
        gauss_seidel(lv, false);
    }

    std::vector<Level> levels_;
    std::vector<double> chol_;
};

/// Rigid body modes of a Dim-dimensional displacement field, row-major with
/// 3 (2D) or 6 (3D) columns; coordinates are centred for conditioning.
template <int Dim>
std::vector<double> rigid_body_modes(const std::vector<Point<Dim>> &nodes)
{
    constexpr int nb = Dim == 2 ? 3 : 6;
    Point<Dim> c{};
    for (const auto &x : nodes)
        for (int k = 0; k < Dim; ++k)
            c[k] += x[k] / static_cast<double>(nodes.size());
    std::vector<double> b(nodes.size() * Dim * nb, 0.0);
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        Point<Dim> x;
        for (int k = 0; k < Dim; ++k)
            x[k] = nodes[v][k] - c[k];
        auto at = [&](int comp, int mode) -> double & { return b[(v * Dim + comp) * nb + mode]; };
        for (int k = 0; k < Dim; ++k)
            at(k, k) = 1.0;
        if constexpr (Dim == 2) {
            at(0, 2) = -x[1];
            at(1, 2) = x[0];
        } else {
            at(1, 3) = -x[2];
            at(2, 3) = x[1];
            at(0, 4) = x[2];
            at(2, 4) = -x[0];
            at(0, 5) = -x[1];
            at(1, 5) = x[0];
        }
    }
    return b;
}

/// Conjugate gradients preconditioned by a prebuilt multigrid hierarchy.
inline CgResult cg_solve(const SparseMatrix &a, std::span<const double> b, const AmgPreconditioner &amg,
                         double tol = 1e-10, std::size_t max_iter = 0)
{
    return detail::pcg(a, b, tol, max_iter, {}, [&](const std::vector<double> &r, std::vector<double> &z) {
        amg.apply(r, z);
    });
}

} // namespace phasefrac
