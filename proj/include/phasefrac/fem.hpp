#pragma once

#include "mesh.hpp"
#include "sparse.hpp"

#include <memory>

namespace phasefrac {

/// Constant gradients of the barycentric basis functions on every cell.
template <int Dim>
struct CellGradients
{
    std::vector<std::array<Point<Dim>, Dim + 1>> grad;
    std::vector<double> measure;

    std::size_t n_cells() const { return measure.size(); }
};

/**
 * Gradients from the inverse Jacobian of the affine reference map; they sum
 * to zero on every cell. Throws Error(mesh) on a degenerate cell.
 */
template <int Dim>
CellGradients<Dim> basis_gradients(const Mesh<Dim> &mesh)
{
    CellGradients<Dim> g;
    g.grad.resize(mesh.n_cells());
    g.measure.resize(mesh.n_cells());
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        const auto &cl = mesh.cell(static_cast<index_t>(c));
        const auto &x0 = mesh.node(cl[0]);
        double j[Dim][Dim]; // columns are edge vectors x_i - x_0
        for (int i = 0; i < Dim; ++i)
            for (int r = 0; r < Dim; ++r)
                j[r][i] = mesh.node(cl[i + 1])[r] - x0[r];
        double inv[Dim][Dim];
        double det;
        if constexpr (Dim == 2) {
            det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
        } else {
            det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                  j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
            inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det;
            inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
            inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
            inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det;
            inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
            inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
            inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det;
            inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
            inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
        }
        if (!(det > 0.0))
            throw Error(ErrorCategory::mesh, "basis_gradients: degenerate cell " + std::to_string(c));
        auto &gr = g.grad[c];
        for (int i = 0; i < Dim; ++i)
            for (int r = 0; r < Dim; ++r)
                gr[i + 1][r] = inv[i][r];
        for (int r = 0; r < Dim; ++r) {
            gr[0][r] = 0.0;
            for (int i = 1; i <= Dim; ++i)
                gr[0][r] -= gr[i][r];
        }
        g.measure[c] = det / (Dim == 2 ? 2.0 : 6.0);
    }
    return g;
}

/**
 * Degrees of freedom of a P1 Lagrange space. Dofs are numbered per node
 * with components interleaved: dof(node, k) = node * components + k.
 * The map caches cell gradients and the assembly pattern of its mesh.
 */
template <int Dim>
struct DofMap
{
    std::size_t mesh_generation = 0;
    std::size_t n_nodes = 0;
    int components = 1;
    std::size_t n_dofs = 0;
    std::vector<index_t> cell_dofs; ///< (Dim + 1) * components entries per cell
    std::shared_ptr<const CellGradients<Dim>> geometry;
    std::shared_ptr<const AssemblyPattern> pattern;

    int dofs_per_cell() const { return (Dim + 1) * components; }
    std::size_t n_cells() const { return geometry->n_cells(); }

    std::span<const index_t> dofs(std::size_t c) const
    {
        return {cell_dofs.data() + c * dofs_per_cell(), static_cast<std::size_t>(dofs_per_cell())};
    }
};

template <int Dim>
DofMap<Dim> p1_space(const Mesh<Dim> &mesh, int components = 1,
                     std::shared_ptr<const CellGradients<Dim>> geometry = nullptr)
{
    if (components != 1 && components != Dim)
        throw Error(ErrorCategory::invalid_argument, "p1_space: components must be 1 or the dimension");
    DofMap<Dim> s;
    s.mesh_generation = mesh.generation();
    s.n_nodes = mesh.n_nodes();
    s.components = components;
    s.n_dofs = mesh.n_nodes() * components;
    s.cell_dofs.reserve(mesh.n_cells() * (Dim + 1) * components);
    for (const auto &cl : mesh.cells())
        for (index_t v : cl)
            for (int k = 0; k < components; ++k)
                s.cell_dofs.push_back(v * components + k);
    s.geometry = geometry ? std::move(geometry) : std::make_shared<const CellGradients<Dim>>(basis_gradients(mesh));
    s.pattern = std::make_shared<const AssemblyPattern>(s.n_dofs, s.cell_dofs, s.dofs_per_cell());
    return s;
}

namespace detail {

template <int Dim>
inline void require_scalar(const DofMap<Dim> &space, std::span<const double> coeff, const char *what)
{
    if (space.components != 1)
        throw Error(ErrorCategory::invalid_argument, std::string(what) + ": scalar space required");
    if (coeff.size() != space.n_cells())
        throw Error(ErrorCategory::invalid_argument, std::string(what) + ": one coefficient per cell required");
}

/// Exact P1 mass moment: int_T phi_i phi_j = |T| (1 + delta_ij) / ((d + 1)(d + 2)).
template <int Dim>
constexpr double mass_moment(bool diagonal)
{
    return (diagonal ? 2.0 : 1.0) / ((Dim + 1) * (Dim + 2));
}

} // namespace detail

/// P1 mass matrix with a per-cell constant coefficient, assembled from exact moments.
template <int Dim>
SparseMatrix mass_matrix(const DofMap<Dim> &space, std::span<const double> cell_coeff)
{
    detail::require_scalar(space, cell_coeff, "mass_matrix");
    const auto &geo = *space.geometry;
    return space.pattern->assemble(space.n_cells(), [&](std::size_t c, std::span<double> ke) {
        const double s = cell_coeff[c] * geo.measure[c];
        for (int a = 0; a <= Dim; ++a)
            for (int b = 0; b <= Dim; ++b)
                ke[a * (Dim + 1) + b] = s * detail::mass_moment<Dim>(a == b);
    });
}

/// P1 Laplace stiffness with a per-cell constant coefficient.
template <int Dim>
SparseMatrix stiffness_matrix(const DofMap<Dim> &space, std::span<const double> cell_coeff)
{
    detail::require_scalar(space, cell_coeff, "stiffness_matrix");
    const auto &geo = *space.geometry;
    return space.pattern->assemble(space.n_cells(), [&](std::size_t c, std::span<double> ke) {
        const double s = cell_coeff[c] * geo.measure[c];
        const auto &g = geo.grad[c];
        for (int a = 0; a <= Dim; ++a)
            for (int b = 0; b <= Dim; ++b)
                ke[a * (Dim + 1) + b] = s * detail::dot<Dim>(g[a], g[b]);
    });
}

namespace detail {

/// Element stiffness of isotropic linear elasticity, scaled by `scale`:
/// K_{ai,bj} = |T| (lambda g_a,i g_b,j + mu (g_a,j g_b,i + delta_ij g_a . g_b)).
template <int Dim>
inline void elasticity_element(const std::array<Point<Dim>, Dim + 1> &g, double measure, double lambda, double mu,
                               double scale, std::span<double> ke)
{
    constexpr int n = (Dim + 1) * Dim;
    const double s = scale * measure;
    for (int a = 0; a <= Dim; ++a)
        for (int b = 0; b <= Dim; ++b) {
            const double gg = dot<Dim>(g[a], g[b]);
            for (int i = 0; i < Dim; ++i)
                for (int j = 0; j < Dim; ++j)
                    ke[(a * Dim + i) * n + b * Dim + j] =
                        s * (lambda * g[a][i] * g[b][j] + mu * (g[a][j] * g[b][i] + (i == j ? gg : 0.0)));
        }
}

} // namespace detail

/**
 * Displacement stiffness g(d)|T| B^T C B with C = lambda I x I + 2 mu II and a
 * per-cell degradation factor.
 */
template <int Dim>
SparseMatrix elasticity_matrix(const DofMap<Dim> &space, double lambda, double mu,
                               std::span<const double> cell_degradation)
{
    if (space.components != Dim)
        throw Error(ErrorCategory::invalid_argument, "elasticity_matrix: vector space required");
    if (cell_degradation.size() != space.n_cells())
        throw Error(ErrorCategory::invalid_argument, "elasticity_matrix: one degradation value per cell required");
    if (!(mu > 0.0) || !(lambda + 2.0 * mu > 0.0))
        throw Error(ErrorCategory::invalid_argument, "elasticity_matrix: requires mu > 0 and lambda + 2 mu > 0");
    const auto &geo = *space.geometry;
    return space.pattern->assemble(space.n_cells(), [&](std::size_t c, std::span<double> ke) {
        detail::elasticity_element<Dim>(geo.grad[c], geo.measure[c], lambda, mu, cell_degradation[c], ke);
    });
}

/**
 * Interpolates a nodal field (with `components` values per node) onto a
 * refined mesh: copied nodes keep their value, midpoints average their
 * endpoints. Exact for fields that are P1 on the old mesh.
 */
template <int Dim>
std::vector<double> transfer_nodal(std::span<const double> field, const TransferMap &map, const Mesh<Dim> &old_mesh,
                                   const Mesh<Dim> &new_mesh, int components = 1)
{
    if (map.source_generation != old_mesh.generation() || map.target_generation != new_mesh.generation())
        throw Error(ErrorCategory::invalid_argument, "transfer_nodal: generation mismatch");
    if (field.size() != old_mesh.n_nodes() * components || map.node_origin.size() != new_mesh.n_nodes())
        throw Error(ErrorCategory::invalid_argument, "transfer_nodal: size mismatch");
    std::vector<double> out(new_mesh.n_nodes() * components);
    std::copy(field.begin(), field.end(), out.begin());
    for (std::size_t v = map.old_node_count; v < map.node_origin.size(); ++v) {
        const auto &o = map.node_origin[v];
        for (int k = 0; k < components; ++k)
            out[v * components + k] = 0.5 * (out[o.first * components + k] + out[o.second * components + k]);
    }
    return out;
}

/// Every child cell inherits its ancestor's value.
inline std::vector<double> transfer_cellwise(std::span<const double> field, const TransferMap &map)
{
    if (field.size() != map.old_cell_count)
        throw Error(ErrorCategory::invalid_argument, "transfer_cellwise: size mismatch");
    std::vector<double> out(map.parent_of_cell.size());
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = field[map.parent_of_cell[c]];
    return out;
}

/// Per-cell mean of a scalar nodal field.
template <int Dim>
std::vector<double> cell_means(const Mesh<Dim> &mesh, std::span<const double> nodal)
{
    std::vector<double> out(mesh.n_cells());
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        double s = 0.0;
        for (index_t v : mesh.cell(static_cast<index_t>(c)))
            s += nodal[v];
        out[c] = s / (Dim + 1);
    }
    return out;
}

} // namespace phasefrac
