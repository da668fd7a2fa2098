#pragma once

#include "common.hpp"

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

namespace phasefrac {

struct MaterialParams
{
    double Gc = 1.0;
    double l0 = 1.0;
    double lambda = 0.0;
    double mu = 1.0;
    double eps_residual = 1e-10;

    /// Throws Error(invalid_argument) if any invariant is violated.
    void validate() const
    {
        if (!(Gc > 0.0))
            throw Error(ErrorCategory::invalid_argument, "material: Gc must be positive");
        if (!(l0 > 0.0))
            throw Error(ErrorCategory::invalid_argument, "material: l0 must be positive");
        if (!(mu > 0.0))
            throw Error(ErrorCategory::invalid_argument, "material: mu must be positive");
        if (!(lambda + 2.0 * mu > 0.0))
            throw Error(ErrorCategory::invalid_argument, "material: lambda + 2 mu must be positive");
        if (!(eps_residual >= 0.0 && eps_residual < 1.0))
            throw Error(ErrorCategory::invalid_argument, "material: residual stiffness must lie in [0, 1)");
    }
};

struct Lame
{
    double lambda;
    double mu;
};

inline Lame lame_from_E_nu(double E, double nu)
{
    if (!(E > 0.0))
        throw Error(ErrorCategory::invalid_argument, "lame_from_E_nu: E must be positive");
    if (!(nu > -1.0 && nu < 0.5))
        throw Error(ErrorCategory::invalid_argument, "lame_from_E_nu: nu must lie in (-1, 0.5)");
    return {nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))};
}

struct Degradation
{
    double g;
    double dg;
};

/// g(d) = (1 - d)^2 + eps and its derivative.
inline Degradation degradation(double d, double eps_residual)
{
    return {(1.0 - d) * (1.0 - d) + eps_residual, -2.0 * (1.0 - d)};
}

inline std::pair<double, double> macaulay(double x)
{
    return {0.5 * (x + std::abs(x)), 0.5 * (x - std::abs(x))};
}

/// Symmetric Dim x Dim tensor; only the upper triangle is stored.
template <int Dim>
class Strain
{
public:
    static constexpr int size = Dim * (Dim + 1) / 2;

    Strain() { v_.fill(0.0); }

    static Strain identity()
    {
        Strain s;
        for (int i = 0; i < Dim; ++i)
            s(i, i) = 1.0;
        return s;
    }

    double &operator()(int i, int j) { return v_[slot(i, j)]; }
    double operator()(int i, int j) const { return v_[slot(i, j)]; }

    double trace() const
    {
        double t = 0.0;
        for (int i = 0; i < Dim; ++i)
            t += (*this)(i, i);
        return t;
    }

    /// Full contraction a : b.
    double dot(const Strain &o) const
    {
        double s = 0.0;
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j)
                s += (*this)(i, j) * o(i, j);
        return s;
    }

    Strain &operator+=(const Strain &o)
    {
        for (int k = 0; k < size; ++k)
            v_[k] += o.v_[k];
        return *this;
    }
    Strain &operator*=(double a)
    {
        for (double &x : v_)
            x *= a;
        return *this;
    }
    friend Strain operator+(Strain a, const Strain &b) { return a += b; }
    friend Strain operator*(double s, Strain a) { return a *= s; }
    friend Strain operator-(Strain a, const Strain &b) { return a += -1.0 * b; }

private:
    static constexpr int slot(int i, int j)
    {
        if (i > j)
            std::swap(i, j);
        // diagonal first, then off-diagonals (0,1), (1,2), (0,2)
        if (i == j)
            return i;
        if constexpr (Dim == 2)
            return 2;
        else
            return j - i == 1 ? 3 + i : 5;
    }

    std::array<double, size> v_;
};

/// Symmetric gradient of a P1 field from its nodal values (node-major, components interleaved).
template <int Dim>
Strain<Dim> strain_from_displacement(std::span<const double> cell_u, const std::array<Point<Dim>, Dim + 1> &grad)
{
    double g[Dim][Dim] = {}; // du_i / dx_j
    for (int a = 0; a <= Dim; ++a)
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j)
                g[i][j] += cell_u[a * Dim + i] * grad[a][j];
    Strain<Dim> e;
    for (int i = 0; i < Dim; ++i)
        for (int j = i; j < Dim; ++j)
            e(i, j) = 0.5 * (g[i][j] + g[j][i]);
    return e;
}

template <int Dim>
struct Eigensystem
{
    std::array<double, Dim> values;
    std::array<Point<Dim>, Dim> vectors; ///< orthonormal, vectors[k] belongs to values[k]
};

namespace detail {

inline Eigensystem<2> eigen_sym(const Strain<2> &e)
{
    const double a = e(0, 0), b = e(0, 1), c = e(1, 1);
    const double mean = 0.5 * (a + c);
    const double r = std::hypot(0.5 * (a - c), b);
    Eigensystem<2> s;
    s.values = {mean + r, mean - r};
    if (r == 0.0) {
        s.vectors = {Point<2>{1.0, 0.0}, Point<2>{0.0, 1.0}};
        return s;
    }
    // eigenvector of the larger value, taken from the better conditioned row
    Point<2> v = (a - c >= 0.0) ? Point<2>{s.values[0] - c, b} : Point<2>{b, s.values[0] - a};
    const double n = std::hypot(v[0], v[1]);
    v = {v[0] / n, v[1] / n};
    s.vectors = {v, Point<2>{-v[1], v[0]}};
    return s;
}

/// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric solution).
inline std::array<double, 3> eigenvalues_analytic(const double m[3][3])
{
    const double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    const double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if (p1 == 0.0)
        return {m[0][0], m[1][1], m[2][2]};
    const double p2 = (m[0][0] - q) * (m[0][0] - q) + (m[1][1] - q) * (m[1][1] - q) + (m[2][2] - q) * (m[2][2] - q) +
                      2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    double b[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
    const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                       b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                       b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double pi = std::acos(-1.0);
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    return {e1, 3.0 * q - e1 - e3, e3};
}

/// Cyclic Jacobi rotations; falls back to the analytic eigenvalues with an
/// eigenvector from cross products if the sweeps fail to converge.
inline Eigensystem<3> eigen_sym(const Strain<3> &e)
{
    double a[3][3], v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            a[i][j] = e(i, j);
            scale = std::max(scale, std::abs(a[i][j]));
        }
    Eigensystem<3> s;
    bool converged = scale == 0.0;
    for (int sweep = 0; sweep < 50 && !converged; ++sweep) {
        const double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
        if (off <= 1e-15 * scale) {
            converged = true;
            break;
        }
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0)
                    continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - sn * vkq;
                    v[k][q] = sn * vkp + c * vkq;
                }
            }
    }
    if (converged) {
        for (int k = 0; k < 3; ++k) {
            s.values[k] = a[k][k];
            s.vectors[k] = {v[0][k], v[1][k], v[2][k]};
        }
        return s;
    }
    double m[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            m[i][j] = e(i, j);
    s.values = eigenvalues_analytic(m);
    for (int k = 0; k < 3; ++k) {
        Point<3> r0{m[0][0] - s.values[k], m[0][1], m[0][2]};
        Point<3> r1{m[1][0], m[1][1] - s.values[k], m[1][2]};
        Point<3> r2{m[2][0], m[2][1], m[2][2] - s.values[k]};
        auto cross = [](const Point<3> &x, const Point<3> &y) {
            return Point<3>{x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]};
        };
        Point<3> best{0, 0, 0};
        for (const auto &c : {cross(r0, r1), cross(r0, r2), cross(r1, r2)})
            if (norm<3>(c) > norm<3>(best))
                best = c;
        const double n = norm<3>(best);
        s.vectors[k] = n > 0.0 ? Point<3>{best[0] / n, best[1] / n, best[2] / n} : Point<3>{0, 0, 0};
    }
    return s;
}

} // namespace detail

template <int Dim>
Eigensystem<Dim> eigen_decompose(const Strain<Dim> &e)
{
    return detail::eigen_sym(e);
}

template <int Dim>
struct SpectralSplit
{
    double e_plus = 0.0;
    double e_minus = 0.0;
    Strain<Dim> strain_plus;
    Strain<Dim> strain_minus;
};

/**
 * Tension/compression split of the strain energy on principal strains.
 * strain_minus is formed as strain - strain_plus, so the sum is exact even
 * for repeated or clustered eigenvalues.
 */
template <int Dim>
SpectralSplit<Dim> spectral_split(const Strain<Dim> &e, double lambda, double mu)
{
    const auto es = eigen_decompose(e);
    SpectralSplit<Dim> out;
    double sq_plus = 0.0, sq_minus = 0.0;
    for (int k = 0; k < Dim; ++k) {
        const auto [p, m] = macaulay(es.values[k]);
        sq_plus += p * p;
        sq_minus += m * m;
        if (p != 0.0)
            for (int i = 0; i < Dim; ++i)
                for (int j = i; j < Dim; ++j)
                    out.strain_plus(i, j) += p * es.vectors[k][i] * es.vectors[k][j];
    }
    out.strain_minus = e - out.strain_plus;
    const auto [tp, tm] = macaulay(e.trace());
    out.e_plus = 0.5 * lambda * tp * tp + mu * sq_plus;
    out.e_minus = 0.5 * lambda * tm * tm + mu * sq_minus;
    return out;
}

template <int Dim>
double isotropic_energy(const Strain<Dim> &e, double lambda, double mu)
{
    const double t = e.trace();
    return 0.5 * lambda * t * t + mu * e.dot(e);
}

/// H' = max(H, e_plus) elementwise.
inline std::vector<double> update_history(std::span<const double> H, std::span<const double> e_plus)
{
    if (H.size() != e_plus.size())
        throw Error(ErrorCategory::invalid_argument, "update_history: size mismatch");
    std::vector<double> out(H.size());
    for (std::size_t i = 0; i < H.size(); ++i)
        out[i] = std::max(H[i], e_plus[i]);
    return out;
}

template <int Dim>
struct HybridStress
{
    Strain<Dim> sigma;
    double lambda_eff; ///< g(d) lambda
    double mu_eff;     ///< g(d) mu
};

/// Isotropically degraded stress; the tangent is g(d)(lambda I x I + 2 mu II).
template <int Dim>
HybridStress<Dim> hybrid_stress(const Strain<Dim> &e, double d, const MaterialParams &p)
{
    const double g = degradation(d, p.eps_residual).g;
    HybridStress<Dim> out;
    out.lambda_eff = g * p.lambda;
    out.mu_eff = g * p.mu;
    out.sigma = (out.lambda_eff * e.trace()) * Strain<Dim>::identity() + (2.0 * out.mu_eff) * e;
    return out;
}

} // namespace phasefrac
