#pragma once

#include "solver.hpp"

#include <numeric>

namespace phasefrac {

enum class RecoveryMethod { simple, area, harmonic, angle, distance };
enum class Marking { max, l2 };

inline const char *to_string(RecoveryMethod m)
{
    switch (m) {
    case RecoveryMethod::simple: return "simple";
    case RecoveryMethod::area: return "area";
    case RecoveryMethod::harmonic: return "harmonic";
    case RecoveryMethod::angle: return "angle";
    case RecoveryMethod::distance: return "distance";
    }
    return "?";
}

inline RecoveryMethod parse_recovery(const std::string &s)
{
    if (s == "simple")
        return RecoveryMethod::simple;
    if (s == "area")
        return RecoveryMethod::area;
    if (s == "harmonic" || s == "harmonic_area")
        return RecoveryMethod::harmonic;
    if (s == "angle")
        return RecoveryMethod::angle;
    if (s == "distance")
        return RecoveryMethod::distance;
    throw Error(ErrorCategory::invalid_argument, "unknown recovery method '" + s + "'");
}

inline const char *to_string(Marking m)
{
    return m == Marking::max ? "max" : "l2";
}

inline Marking parse_marking(const std::string &s)
{
    if (s == "max")
        return Marking::max;
    if (s == "l2")
        return Marking::l2;
    throw Error(ErrorCategory::invalid_argument, "unknown marking criterion '" + s + "'");
}

template <int Dim>
struct RecoveredGradient
{
    std::vector<Point<Dim>> grad; ///< one vector per node
    RecoveryMethod method = RecoveryMethod::simple;
};

/// Constant gradient of a scalar P1 field on every cell.
template <int Dim>
std::vector<Point<Dim>> cell_gradients(const CellGradients<Dim> &geo, const Mesh<Dim> &mesh, std::span<const double> d)
{
    std::vector<Point<Dim>> out(mesh.n_cells());
    for (std::size_t c = 0; c < out.size(); ++c) {
        Point<Dim> g{};
        const auto &cl = mesh.cell(static_cast<index_t>(c));
        for (int a = 0; a <= Dim; ++a)
            for (int k = 0; k < Dim; ++k)
                g[k] += d[cl[a]] * geo.grad[c][a][k];
        out[c] = g;
    }
    return out;
}

/// Weighted nodal average of the incident cell gradients.
template <int Dim>
RecoveredGradient<Dim> recover_gradient(const Mesh<Dim> &mesh, std::span<const double> d, RecoveryMethod method,
                                        const CellGradients<Dim> &geo)
{
    if (d.size() != mesh.n_nodes())
        throw Error(ErrorCategory::invalid_argument, "recover_gradient: one value per node required");
    const auto cg = cell_gradients(geo, mesh, d);
    RecoveredGradient<Dim> r;
    r.method = method;
    r.grad.assign(mesh.n_nodes(), Point<Dim>{});
    std::vector<double> wsum(mesh.n_nodes(), 0.0);
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        const auto ci = static_cast<index_t>(c);
        const auto &cl = mesh.cell(ci);
        for (int a = 0; a <= Dim; ++a) {
            double w = 1.0;
            switch (method) {
            case RecoveryMethod::simple: break;
            case RecoveryMethod::area: w = geo.measure[c]; break;
            case RecoveryMethod::harmonic: w = 1.0 / geo.measure[c]; break;
            case RecoveryMethod::angle: w = vertex_angle(mesh, ci, a); break;
            case RecoveryMethod::distance:
                w = detail::norm<Dim>(detail::sub<Dim>(mesh.centroid(ci), mesh.node(cl[a])));
                break;
            }
            wsum[cl[a]] += w;
            for (int k = 0; k < Dim; ++k)
                r.grad[cl[a]][k] += w * cg[c][k];
        }
    }
    for (std::size_t v = 0; v < r.grad.size(); ++v)
        if (wsum[v] > 0.0)
            for (int k = 0; k < Dim; ++k)
                r.grad[v][k] /= wsum[v];
    return r;
}

template <int Dim>
RecoveredGradient<Dim> recover_gradient(const Mesh<Dim> &mesh, std::span<const double> d,
                                        RecoveryMethod method = RecoveryMethod::simple)
{
    return recover_gradient(mesh, d, method, basis_gradients(mesh));
}

struct ErrorIndicators
{
    std::vector<double> eta; ///< per cell
    double global = 0.0;     ///< sqrt of the sum of squares
};

/**
 * eta_T^2 = int_T |I_h(R d) - grad d_h|^2 with the recovered gradient
 * interpolated linearly from its nodal values, integrated exactly.
 */
template <int Dim>
ErrorIndicators error_indicators(const Mesh<Dim> &mesh, std::span<const double> d, const RecoveredGradient<Dim> &rec,
                                 const CellGradients<Dim> &geo)
{
    if (d.size() != mesh.n_nodes() || rec.grad.size() != mesh.n_nodes())
        throw Error(ErrorCategory::invalid_argument, "error_indicators: size mismatch");
    const auto cg = cell_gradients(geo, mesh, d);
    ErrorIndicators out;
    out.eta.resize(mesh.n_cells());
    double total = 0.0;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        const auto &cl = mesh.cell(static_cast<index_t>(c));
        double e2 = 0.0;
        for (int k = 0; k < Dim; ++k) {
            double sum = 0.0, sq = 0.0;
            for (int a = 0; a <= Dim; ++a) {
                const double w = rec.grad[cl[a]][k] - cg[c][k];
                sum += w;
                sq += w * w;
            }
            e2 += sq + sum * sum;
        }
        e2 *= geo.measure[c] / ((Dim + 1) * (Dim + 2));
        out.eta[c] = std::sqrt(e2);
        total += e2;
    }
    out.global = std::sqrt(total);
    return out;
}

template <int Dim>
ErrorIndicators error_indicators(const Mesh<Dim> &mesh, std::span<const double> d, const RecoveredGradient<Dim> &rec)
{
    return error_indicators(mesh, d, rec, basis_gradients(mesh));
}

namespace detail {

inline void check_theta(double theta)
{
    if (!(theta > 0.0 && theta < 1.0))
        throw Error(ErrorCategory::invalid_argument, "marking: theta must lie in (0, 1)");
}

} // namespace detail

/// Cells with eta > theta * max eta, in increasing index order.
inline std::vector<index_t> mark_max(std::span<const double> eta, double theta)
{
    detail::check_theta(theta);
    std::vector<index_t> out;
    if (eta.empty())
        return out;
    const double m = *std::max_element(eta.begin(), eta.end());
    for (std::size_t c = 0; c < eta.size(); ++c)
        if (eta[c] > theta * m)
            out.push_back(static_cast<index_t>(c));
    return out;
}

/// Smallest prefix of cells sorted by decreasing eta (ties by index) whose
/// squared sum exceeds theta * sum of all squares.
inline std::vector<index_t> mark_l2(std::span<const double> eta, double theta)
{
    detail::check_theta(theta);
    std::vector<index_t> order(eta.size());
    std::iota(order.begin(), order.end(), index_t{0});
    std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) { return eta[a] > eta[b]; });
    double total = 0.0;
    for (double e : eta)
        total += e * e;
    std::vector<index_t> out;
    if (total == 0.0)
        return out;
    double acc = 0.0;
    for (index_t c : order) {
        if (acc > theta * total)
            break;
        out.push_back(c);
        acc += eta[c] * eta[c];
    }
    return out;
}

struct AdaptivityOptions
{
    RecoveryMethod method = RecoveryMethod::simple;
    Marking marking = Marking::max;
    double theta = 0.2;
    double h_min = 0.0;
};

/// Result of one refine-and-transfer pass; `transfer` maps the old mesh to the new one.
struct AdaptResult
{
    bool changed = false;
    std::size_t marked = 0;
    TransferMap transfer;
};

/**
 * Bisects the marked cells whose diameter exceeds h_min, then moves u and d
 * by nodal interpolation and H by inheritance onto the new mesh.
 */
template <int Dim>
AdaptResult adapt(Mesh<Dim> &mesh, SimulationState<Dim> &s, const std::vector<index_t> &marked, double h_min)
{
    s.check(mesh);
    std::vector<index_t> split;
    for (index_t c : marked)
        if (mesh.diameter(c) > h_min)
            split.push_back(c);
    AdaptResult res;
    res.marked = split.size();
    if (split.empty()) {
        res.transfer = TransferMap::identity(mesh.generation(), mesh.n_nodes(), mesh.n_cells());
        return res;
    }
    auto [fine, map] = bisect(mesh, split);
    s.u = transfer_nodal<Dim>(s.u, map, mesh, fine, Dim);
    s.d = transfer_nodal<Dim>(s.d, map, mesh, fine, 1);
    s.H = transfer_cellwise(s.H, map);
    s.mesh_generation = fine.generation();
    mesh = std::move(fine);
    res.changed = true;
    res.transfer = std::move(map);
    return res;
}

/// Estimates, marks and adapts once with the given options.
template <int Dim>
AdaptResult estimate_and_adapt(Mesh<Dim> &mesh, SimulationState<Dim> &s, const AdaptivityOptions &opt,
                               const CellGradients<Dim> &geo)
{
    const auto rec = recover_gradient(mesh, s.d, opt.method, geo);
    const auto ind = error_indicators(mesh, s.d, rec, geo);
    const auto marked = opt.marking == Marking::max ? mark_max(ind.eta, opt.theta) : mark_l2(ind.eta, opt.theta);
    return adapt(mesh, s, marked, opt.h_min);
}

} // namespace phasefrac
