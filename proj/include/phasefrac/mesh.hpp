#pragma once

#include "common.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace phasefrac {

/**
 * Named group of boundary facets. The predicate is evaluated on the facet
 * centroid when a mesh is built; the first matching group wins.
 */
template <int Dim>
struct BoundaryGroup
{
    std::string name;
    std::function<bool(const Point<Dim> &)> contains;
};

/// How the bisection state of input cells is initialised.
enum class RefinementInit {
    /// Refinement edge is the longest edge, ties by the smallest opposite vertex.
    longest_edge,
    /// Cells are given in bisection vertex order (Kuhn path order); the
    /// refinement edge joins the first and last vertex.
    vertex_order
};

/// Origin of a node after a bisection: either a copied node or the midpoint
/// of the segment joining two earlier nodes of the refined mesh.
struct NodeOrigin
{
    index_t first = -1;
    index_t second = -1;

    bool is_midpoint() const { return second >= 0; }
};

/**
 * Lineage between a mesh and its refinement. Nodes of the old mesh keep
 * their indices; appended nodes are midpoints whose endpoints always have
 * smaller indices, so a single forward sweep interpolates P1 data exactly.
 */
struct TransferMap
{
    std::size_t source_generation = 0;
    std::size_t target_generation = 0;
    std::size_t old_node_count = 0;
    std::size_t old_cell_count = 0;
    std::vector<index_t> parent_of_cell;
    std::vector<NodeOrigin> node_origin;

    bool is_identity() const
    {
        if (node_origin.size() != old_node_count || parent_of_cell.size() != old_cell_count)
            return false;
        for (std::size_t c = 0; c < parent_of_cell.size(); ++c)
            if (parent_of_cell[c] != static_cast<index_t>(c))
                return false;
        return true;
    }

    static TransferMap identity(std::size_t generation, std::size_t n_nodes, std::size_t n_cells)
    {
        TransferMap t;
        t.source_generation = t.target_generation = generation;
        t.old_node_count = n_nodes;
        t.old_cell_count = n_cells;
        t.parent_of_cell.resize(n_cells);
        std::iota(t.parent_of_cell.begin(), t.parent_of_cell.end(), index_t{0});
        t.node_origin.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i)
            t.node_origin[i].first = static_cast<index_t>(i);
        return t;
    }
};

template <int Dim>
class Mesh;

template <int Dim>
Mesh<Dim> build_mesh(std::vector<Point<Dim>> nodes, std::vector<std::array<index_t, Dim + 1>> cells,
                     const std::vector<BoundaryGroup<Dim>> &boundary = {},
                     RefinementInit init = RefinementInit::longest_edge);

template <int Dim>
std::pair<Mesh<Dim>, TransferMap> bisect(const Mesh<Dim> &mesh, const std::vector<index_t> &marked);

/**
 * Conforming simplex mesh (triangles for Dim == 2, tetrahedra for Dim == 3).
 *
 * Cells are stored positively oriented. Each cell also carries its bisection
 * state: a vertex ordering (x0, ..., xDim) and a tag k, with the refinement
 * edge x0--xk. Bisecting creates z = (x0 + xk)/2 and the children
 * (x0, ..., x{k-1}, z, x{k+1}, ..., xDim) and (x1, ..., xk, z, x{k+1}, ..., xDim)
 * with tag k - 1 (wrapping to Dim). In 2D this is newest-vertex bisection.
 *
 * Meshes are values; refinement produces a new mesh.
 */
template <int Dim>
class Mesh
{
    static_assert(Dim == 2 || Dim == 3, "only triangles and tetrahedra are supported");

public:
    static constexpr int dimension = Dim;
    static constexpr int vertices_per_cell = Dim + 1;
    static constexpr int edges_per_cell = Dim == 2 ? 3 : 6;

    using Cell = std::array<index_t, Dim + 1>;
    using Facet = std::array<index_t, Dim>;

    struct TaggedFacet
    {
        Facet nodes; ///< sorted ascending
        index_t cell;
        int group; ///< index into boundary_groups(), or -1
    };

    Mesh() = default;

    int dim() const { return Dim; }
    std::size_t n_nodes() const { return nodes_.size(); }
    std::size_t n_cells() const { return cells_.size(); }
    std::size_t generation() const { return generation_; }

    const std::vector<Point<Dim>> &nodes() const { return nodes_; }
    const std::vector<Cell> &cells() const { return cells_; }
    const Point<Dim> &node(index_t i) const { return nodes_[i]; }
    const Cell &cell(index_t c) const { return cells_[c]; }

    /// Bisection depth of a cell relative to the initial mesh.
    unsigned depth(index_t c) const { return depth_[c]; }

    /// Global endpoints of the edge the next bisection of `c` splits.
    std::pair<index_t, index_t> refinement_edge(index_t c) const
    {
        return {order_[c][0], order_[c][tag_[c]]};
    }

    /// Position of the refinement edge in local_edges() for cells()[c].
    int refinement_edge_local(index_t c) const
    {
        auto [a, b] = refinement_edge(c);
        const auto &cl = cells_[c];
        for (int e = 0; e < edges_per_cell; ++e) {
            auto [i, j] = local_edges()[e];
            if ((cl[i] == a && cl[j] == b) || (cl[i] == b && cl[j] == a))
                return e;
        }
        return -1;
    }

    static constexpr std::array<std::pair<int, int>, edges_per_cell> local_edges()
    {
        if constexpr (Dim == 2)
            return {{{1, 2}, {2, 0}, {0, 1}}};
        else
            return {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
    }

    const std::vector<std::string> &boundary_groups() const { return groups_; }
    const std::vector<TaggedFacet> &boundary_facets() const { return facets_; }

    int group_id(const std::string &name) const
    {
        for (std::size_t g = 0; g < groups_.size(); ++g)
            if (groups_[g] == name)
                return static_cast<int>(g);
        return -1;
    }

    /// Sorted nodes lying on facets of the named group.
    std::vector<index_t> nodes_in_group(const std::string &name) const
    {
        const int g = group_id(name);
        if (g < 0)
            throw Error(ErrorCategory::mesh, "unknown boundary group '" + name + "'");
        std::vector<index_t> out;
        for (const auto &f : facets_)
            if (f.group == g)
                out.insert(out.end(), f.nodes.begin(), f.nodes.end());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Sorted nodes lying on any boundary facet.
    std::vector<index_t> boundary_nodes() const
    {
        std::vector<index_t> out;
        for (const auto &f : facets_)
            out.insert(out.end(), f.nodes.begin(), f.nodes.end());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    Point<Dim> centroid(index_t c) const
    {
        Point<Dim> x{};
        for (index_t v : cells_[c])
            for (int i = 0; i < Dim; ++i)
                x[i] += nodes_[v][i];
        for (int i = 0; i < Dim; ++i)
            x[i] /= (Dim + 1);
        return x;
    }

    /// Longest edge length.
    double diameter(index_t c) const
    {
        double h = 0.0;
        const auto &cl = cells_[c];
        for (auto [i, j] : local_edges())
            h = std::max(h, detail::norm<Dim>(detail::sub<Dim>(nodes_[cl[i]], nodes_[cl[j]])));
        return h;
    }

    friend Mesh build_mesh<Dim>(std::vector<Point<Dim>>, std::vector<Cell>, const std::vector<BoundaryGroup<Dim>> &,
                                RefinementInit);
    friend std::pair<Mesh, TransferMap> bisect<Dim>(const Mesh &, const std::vector<index_t> &);

private:
    std::vector<Point<Dim>> nodes_;
    std::vector<Cell> cells_;
    std::vector<Cell> order_;
    std::vector<std::uint8_t> tag_;
    std::vector<std::uint16_t> depth_;
    std::size_t generation_ = 0;
    std::vector<std::string> groups_;
    std::vector<TaggedFacet> facets_;
};

namespace detail {

/// Signed simplex measure (area / volume) of the given vertices.
template <int Dim>
inline double signed_measure(const std::array<Point<Dim>, Dim + 1> &x)
{
    if constexpr (Dim == 2) {
        const double ax = x[1][0] - x[0][0], ay = x[1][1] - x[0][1];
        const double bx = x[2][0] - x[0][0], by = x[2][1] - x[0][1];
        return 0.5 * (ax * by - ay * bx);
    } else {
        const auto a = sub<3>(x[1], x[0]);
        const auto b = sub<3>(x[2], x[0]);
        const auto c = sub<3>(x[3], x[0]);
        const double det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
                           a[2] * (b[0] * c[1] - b[1] * c[0]);
        return det / 6.0;
    }
}

template <int Dim>
inline std::array<Point<Dim>, Dim + 1> cell_points(const std::vector<Point<Dim>> &nodes,
                                                   const std::array<index_t, Dim + 1> &cell)
{
    std::array<Point<Dim>, Dim + 1> x;
    for (int i = 0; i <= Dim; ++i)
        x[i] = nodes[cell[i]];
    return x;
}

template <int Dim>
inline double signed_measure(const std::vector<Point<Dim>> &nodes,
                             const std::array<index_t, Dim + 1> &cell)
{
    return signed_measure<Dim>(cell_points<Dim>(nodes, cell));
}

template <int Dim>
inline std::array<index_t, Dim + 1> oriented(const std::vector<Point<Dim>> &nodes,
                                             std::array<index_t, Dim + 1> cell)
{
    if (signed_measure<Dim>(nodes, cell) < 0.0)
        std::swap(cell[Dim - 1], cell[Dim]);
    return cell;
}

template <int Dim>
inline std::array<index_t, Dim> facet_of(const std::array<index_t, Dim + 1> &cell, int skip)
{
    std::array<index_t, Dim> f;
    int k = 0;
    for (int i = 0; i <= Dim; ++i)
        if (i != skip)
            f[k++] = cell[i];
    std::sort(f.begin(), f.end());
    return f;
}

template <int Dim>
struct FacetRecord
{
    std::array<index_t, Dim> nodes;
    index_t cell;
};

/// All cell facets sorted by their node tuples; equal tuples are adjacent.
template <int Dim>
inline std::vector<FacetRecord<Dim>> sorted_facets(const std::vector<std::array<index_t, Dim + 1>> &cells)
{
    std::vector<FacetRecord<Dim>> all;
    all.reserve(cells.size() * (Dim + 1));
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (int s = 0; s <= Dim; ++s)
            all.push_back({facet_of<Dim>(cells[c], s), static_cast<index_t>(c)});
    std::sort(all.begin(), all.end(), [](const auto &a, const auto &b) {
        return a.nodes != b.nodes ? a.nodes < b.nodes : a.cell < b.cell;
    });
    return all;
}

/// Reorders a cell so that its longest edge joins positions 0 and Dim.
template <int Dim>
inline std::array<index_t, Dim + 1> longest_edge_order(const std::vector<Point<Dim>> &nodes,
                                                       std::array<index_t, Dim + 1> cell)
{
    std::array<index_t, Dim + 1> best{};
    double best_len = -1.0;
    std::array<index_t, Dim - 1> best_opp{};
    for (int i = 0; i <= Dim; ++i)
        for (int j = i + 1; j <= Dim; ++j) {
            const double len = norm<Dim>(sub<Dim>(nodes[cell[i]], nodes[cell[j]]));
            std::array<index_t, Dim - 1> opp{};
            int k = 0;
            for (int m = 0; m <= Dim; ++m)
                if (m != i && m != j)
                    opp[k++] = cell[m];
            std::sort(opp.begin(), opp.end());
            const double tol = 1e-12 * std::max(len, best_len);
            const bool longer = len > best_len + tol;
            const bool tie = std::abs(len - best_len) <= tol;
            if (longer || (tie && opp < best_opp)) {
                best_len = len;
                best_opp = opp;
                const index_t a = std::min(cell[i], cell[j]);
                const index_t b = std::max(cell[i], cell[j]);
                best[0] = a;
                for (int m = 0; m < Dim - 1; ++m)
                    best[1 + m] = opp[m];
                best[Dim] = b;
            }
        }
    return best;
}

/// Tests whether point p lies on the facet spanned by `f` (excluding its vertices).
template <int Dim>
inline bool point_on_facet(const Point<Dim> &p, const std::array<Point<Dim>, Dim> &f, double tol)
{
    if constexpr (Dim == 2) {
        const auto t = sub<2>(f[1], f[0]);
        const auto w = sub<2>(p, f[0]);
        const double len2 = dot<2>(t, t);
        const double cross = t[0] * w[1] - t[1] * w[0];
        if (std::abs(cross) > tol * len2)
            return false;
        const double s = dot<2>(t, w) / len2;
        return s > tol && s < 1.0 - tol;
    } else {
        const auto a = sub<3>(f[1], f[0]);
        const auto b = sub<3>(f[2], f[0]);
        const auto w = sub<3>(p, f[0]);
        const Point<3> n{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
        const double nn = norm<3>(n);
        if (std::abs(dot<3>(n, w)) > tol * nn * std::sqrt(nn))
            return false;
        // barycentric coordinates in the facet plane
        const double aa = dot<3>(a, a), ab = dot<3>(a, b), bb = dot<3>(b, b);
        const double wa = dot<3>(w, a), wb = dot<3>(w, b);
        const double den = aa * bb - ab * ab;
        const double s = (bb * wa - ab * wb) / den;
        const double t = (aa * wb - ab * wa) / den;
        const double r = 1.0 - s - t;
        const bool inside = s >= -tol && t >= -tol && r >= -tol;
        const bool vertex = (s > 1.0 - tol) || (t > 1.0 - tol) || (r > 1.0 - tol);
        return inside && !vertex;
    }
}

template <int Dim>
inline std::vector<typename Mesh<Dim>::TaggedFacet>
tag_facets(const std::vector<Point<Dim>> &nodes, const std::vector<std::array<index_t, Dim + 1>> &cells,
           const std::vector<BoundaryGroup<Dim>> &groups)
{
    using TF = typename Mesh<Dim>::TaggedFacet;
    std::vector<TF> out;
    const auto all = sorted_facets<Dim>(cells);
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i + 1;
        while (j < all.size() && all[j].nodes == all[i].nodes)
            ++j;
        if (j - i > 2)
            throw Error(ErrorCategory::mesh, "non-conforming input: facet shared by more than two cells");
        if (j - i == 1) {
            Point<Dim> c{};
            for (index_t v : all[i].nodes)
                for (int k = 0; k < Dim; ++k)
                    c[k] += nodes[v][k] / Dim;
            int g = -1;
            for (std::size_t k = 0; k < groups.size(); ++k)
                if (groups[k].contains && groups[k].contains(c)) {
                    g = static_cast<int>(k);
                    break;
                }
            out.push_back({all[i].nodes, all[i].cell, g});
        }
        i = j;
    }
    return out;
}

/// Detects nodes sitting inside boundary-incident facets (hanging nodes).
/// `counts(v, facet)` may excuse a geometric hit, e.g. a node on the opposite face of a slit.
template <int Dim, class Counts = std::nullptr_t>
inline bool has_hanging_nodes(const std::vector<Point<Dim>> &nodes,
                              const std::vector<typename Mesh<Dim>::TaggedFacet> &facets, Counts counts = nullptr)
{
    if (facets.empty())
        return false;
    Point<Dim> lo, hi;
    lo.fill(std::numeric_limits<double>::max());
    hi.fill(std::numeric_limits<double>::lowest());
    for (const auto &p : nodes)
        for (int k = 0; k < Dim; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    const int nb = std::max(1, static_cast<int>(std::pow(static_cast<double>(nodes.size()), 1.0 / Dim)));
    std::array<double, Dim> width;
    for (int k = 0; k < Dim; ++k)
        width[k] = std::max(hi[k] - lo[k], 1e-300) / nb;
    auto bucket = [&](const Point<Dim> &p, int k) {
        return std::clamp(static_cast<int>((p[k] - lo[k]) / width[k]), 0, nb - 1);
    };
    std::unordered_map<std::int64_t, std::vector<index_t>> grid;
    auto key = [&](const std::array<int, Dim> &b) {
        std::int64_t h = 0;
        for (int k = 0; k < Dim; ++k)
            h = h * (nb + 1) + b[k];
        return h;
    };
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        std::array<int, Dim> b;
        for (int k = 0; k < Dim; ++k)
            b[k] = bucket(nodes[v], k);
        grid[key(b)].push_back(static_cast<index_t>(v));
    }
    for (const auto &f : facets) {
        std::array<Point<Dim>, Dim> fx;
        std::array<int, Dim> blo, bhi;
        blo.fill(nb);
        bhi.fill(-1);
        for (int i = 0; i < Dim; ++i) {
            fx[i] = nodes[f.nodes[i]];
            for (int k = 0; k < Dim; ++k) {
                blo[k] = std::min(blo[k], bucket(fx[i], k));
                bhi[k] = std::max(bhi[k], bucket(fx[i], k));
            }
        }
        std::array<int, Dim> b = blo;
        while (true) {
            auto it = grid.find(key(b));
            if (it != grid.end())
                for (index_t v : it->second) {
                    if (std::find(f.nodes.begin(), f.nodes.end(), v) != f.nodes.end())
                        continue;
                    if (point_on_facet<Dim>(nodes[v], fx, 1e-10)) {
                        if constexpr (std::is_same_v<Counts, std::nullptr_t>)
                            return true;
                        else if (counts(v, f.nodes))
                            return true;
                    }
                }
            int k = 0;
            while (k < Dim && ++b[k] > bhi[k]) {
                b[k] = blo[k];
                ++k;
            }
            if (k == Dim)
                break;
        }
    }
    return false;
}

} // namespace detail

/**
 * Builds a mesh from raw coordinates and connectivity.
 *
 * Cells may be given in either orientation; they are stored positively
 * oriented. Throws Error(mesh) for out-of-range or repeated indices,
 * degenerate cells and non-conforming input.
 */
template <int Dim>
Mesh<Dim> build_mesh(std::vector<Point<Dim>> nodes, std::vector<std::array<index_t, Dim + 1>> cells,
                     const std::vector<BoundaryGroup<Dim>> &boundary, RefinementInit init)
{
    const auto n = static_cast<index_t>(nodes.size());
    double scale = 0.0;
    for (const auto &p : nodes)
        for (double x : p)
            scale = std::max(scale, std::abs(x));
    Mesh<Dim> m;
    m.order_.reserve(cells.size());
    m.cells_.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto cl = cells[c];
        for (index_t v : cl)
            if (v < 0 || v >= n)
                throw Error(ErrorCategory::mesh, "cell " + std::to_string(c) + ": node index out of range");
        auto sorted = cl;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error(ErrorCategory::mesh, "cell " + std::to_string(c) + ": degenerate cell (repeated node)");
        const double vol = detail::signed_measure<Dim>(nodes, cl);
        double h = 0.0;
        for (auto [i, j] : Mesh<Dim>::local_edges())
            h = std::max(h, detail::norm<Dim>(detail::sub<Dim>(nodes[cl[i]], nodes[cl[j]])));
        if (!(std::abs(vol) > 1e-13 * std::pow(h, Dim)))
            throw Error(ErrorCategory::mesh, "cell " + std::to_string(c) + ": degenerate cell (zero measure)");
        m.order_.push_back(init == RefinementInit::longest_edge ? detail::longest_edge_order<Dim>(nodes, cl)
                                                                : cl);
        m.cells_.push_back(detail::oriented<Dim>(nodes, cl));
    }
    m.tag_.assign(cells.size(), static_cast<std::uint8_t>(Dim));
    m.depth_.assign(cells.size(), 0);
    for (const auto &g : boundary)
        m.groups_.push_back(g.name);
    m.facets_ = detail::tag_facets<Dim>(nodes, m.cells_, boundary);
    if (detail::has_hanging_nodes<Dim>(nodes, m.facets_))
        throw Error(ErrorCategory::mesh, "non-conforming input: hanging node");
    m.nodes_ = std::move(nodes);
    return m;
}

/// Positive measure (area or volume) of a cell.
template <int Dim>
double cell_measure(const Mesh<Dim> &mesh, index_t c)
{
    return detail::signed_measure<Dim>(mesh.nodes(), mesh.cell(c));
}

template <int Dim>
double total_measure(const Mesh<Dim> &mesh)
{
    double s = 0.0;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c)
        s += cell_measure(mesh, static_cast<index_t>(c));
    return s;
}

/// Cells having `vertex` as a corner, in ascending order.
template <int Dim>
std::vector<index_t> vertex_patch(const Mesh<Dim> &mesh, index_t vertex)
{
    std::vector<index_t> out;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        const auto &cl = mesh.cell(static_cast<index_t>(c));
        if (std::find(cl.begin(), cl.end(), vertex) != cl.end())
            out.push_back(static_cast<index_t>(c));
    }
    return out;
}

/// Node-to-cell incidence in compressed form; patch of node v is
/// cells[offsets[v] .. offsets[v+1]).
struct VertexPatches
{
    std::vector<std::size_t> offsets;
    std::vector<index_t> cells;

    std::size_t size(index_t v) const { return offsets[v + 1] - offsets[v]; }
};

template <int Dim>
VertexPatches vertex_patches(const Mesh<Dim> &mesh)
{
    VertexPatches p;
    p.offsets.assign(mesh.n_nodes() + 1, 0);
    for (const auto &cl : mesh.cells())
        for (index_t v : cl)
            ++p.offsets[v + 1];
    std::partial_sum(p.offsets.begin(), p.offsets.end(), p.offsets.begin());
    p.cells.resize(p.offsets.back());
    auto fill = p.offsets;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c)
        for (index_t v : mesh.cell(static_cast<index_t>(c)))
            p.cells[fill[v]++] = static_cast<index_t>(c);
    return p;
}

/// Interior angle (2D, radians) or solid angle (3D, steradians) of cell `c`
/// at its local vertex `local`.
template <int Dim>
double vertex_angle(const Mesh<Dim> &mesh, index_t c, int local)
{
    const auto &cl = mesh.cell(c);
    const auto &x = mesh.node(cl[local]);
    if constexpr (Dim == 2) {
        const auto a = detail::sub<2>(mesh.node(cl[(local + 1) % 3]), x);
        const auto b = detail::sub<2>(mesh.node(cl[(local + 2) % 3]), x);
        return std::atan2(std::abs(a[0] * b[1] - a[1] * b[0]), detail::dot<2>(a, b));
    } else {
        std::array<Point<3>, 3> r;
        int k = 0;
        for (int i = 0; i < 4; ++i)
            if (i != local)
                r[k++] = detail::sub<3>(mesh.node(cl[i]), x);
        const double la = detail::norm<3>(r[0]), lb = detail::norm<3>(r[1]), lc = detail::norm<3>(r[2]);
        const double triple = std::abs(r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]));
        const double den = la * lb * lc + detail::dot<3>(r[0], r[1]) * lc + detail::dot<3>(r[0], r[2]) * lb +
                           detail::dot<3>(r[1], r[2]) * la;
        return 2.0 * std::atan2(triple, den);
    }
}

struct MeshQuality
{
    double min_angle = 0.0;  ///< degrees; planar angle in 2D, dihedral angle in 3D
    double min_aspect = 0.0; ///< 1 for the equilateral simplex
    double max_aspect = 0.0;
};

namespace detail {

/// Normalised aspect ratio: longest edge over inradius, scaled so the
/// regular simplex scores 1.
template <int Dim>
inline double aspect_ratio(const Mesh<Dim> &mesh, index_t c)
{
    const auto &cl = mesh.cell(c);
    const double vol = cell_measure(mesh, c);
    double surface = 0.0;
    for (int s = 0; s <= Dim; ++s) {
        std::array<Point<Dim>, Dim> f;
        int k = 0;
        for (int i = 0; i <= Dim; ++i)
            if (i != s)
                f[k++] = mesh.node(cl[i]);
        if constexpr (Dim == 2) {
            surface += norm<2>(sub<2>(f[1], f[0]));
        } else {
            const auto a = sub<3>(f[1], f[0]);
            const auto b = sub<3>(f[2], f[0]);
            const Point<3> n{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
            surface += 0.5 * norm<3>(n);
        }
    }
    const double inradius = Dim * vol / surface;
    const double regular = Dim == 2 ? 2.0 * std::sqrt(3.0) : 2.0 * std::sqrt(6.0);
    return mesh.diameter(c) / (regular * inradius);
}

template <int Dim>
inline double min_cell_angle(const Mesh<Dim> &mesh, index_t c)
{
    const auto &cl = mesh.cell(c);
    double best = 180.0;
    if constexpr (Dim == 2) {
        for (int v = 0; v < 3; ++v)
            best = std::min(best, vertex_angle(mesh, c, v) * 180.0 / M_PI);
    } else {
        // dihedral angle along edge (i, j) between the faces containing it
        for (auto [i, j] : Mesh<3>::local_edges()) {
            int k = -1, l = -1;
            for (int m = 0; m < 4; ++m)
                if (m != i && m != j)
                    (k < 0 ? k : l) = m;
            const auto &a = mesh.node(cl[i]);
            const auto e = sub<3>(mesh.node(cl[j]), a);
            auto perp = [&](const Point<3> &p) {
                auto w = sub<3>(p, a);
                const double t = dot<3>(w, e) / dot<3>(e, e);
                for (int q = 0; q < 3; ++q)
                    w[q] -= t * e[q];
                return w;
            };
            const auto u = perp(mesh.node(cl[k]));
            const auto w = perp(mesh.node(cl[l]));
            const double cosang = dot<3>(u, w) / (norm<3>(u) * norm<3>(w));
            best = std::min(best, std::acos(std::clamp(cosang, -1.0, 1.0)) * 180.0 / M_PI);
        }
    }
    return best;
}

} // namespace detail

template <int Dim>
MeshQuality mesh_quality(const Mesh<Dim> &mesh)
{
    MeshQuality q;
    q.min_angle = 180.0;
    q.min_aspect = std::numeric_limits<double>::max();
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        const auto ci = static_cast<index_t>(c);
        q.min_angle = std::min(q.min_angle, detail::min_cell_angle(mesh, ci));
        const double a = detail::aspect_ratio(mesh, ci);
        q.min_aspect = std::min(q.min_aspect, a);
        q.max_aspect = std::max(q.max_aspect, a);
    }
    return q;
}

/// Number of cells incident to every distinct facet, keyed by sorted node tuple.
template <int Dim>
std::map<std::array<index_t, Dim>, int> facet_incidence(const Mesh<Dim> &mesh)
{
    std::map<std::array<index_t, Dim>, int> count;
    for (const auto &cl : mesh.cells())
        for (int s = 0; s <= Dim; ++s)
            ++count[detail::facet_of<Dim>(cl, s)];
    return count;
}

/**
 * True when every facet has at most two cells and no node hangs on a facet.
 * A node inside a one-sided facet only hangs if it shares a cell with two of
 * the facet's vertices, so the two faces of a slit may be refined independently.
 */
template <int Dim>
bool is_conforming(const Mesh<Dim> &mesh)
{
    const auto incidence = facet_incidence(mesh);
    std::vector<typename Mesh<Dim>::TaggedFacet> single;
    for (const auto &[f, n] : incidence) {
        if (n > 2)
            return false;
        if (n == 1)
            single.push_back({f, -1, -1});
    }
    const auto patches = vertex_patches(mesh);
    auto counts = [&](index_t v, const std::array<index_t, Dim> &facet) {
        int shared = 0;
        for (index_t w : facet) {
            bool adjacent = false;
            for (std::size_t k = patches.offsets[v]; k < patches.offsets[v + 1] && !adjacent; ++k) {
                const auto &cl = mesh.cell(patches.cells[k]);
                adjacent = std::find(cl.begin(), cl.end(), w) != cl.end();
            }
            shared += adjacent;
        }
        return shared >= 2;
    };
    return !detail::has_hanging_nodes<Dim>(mesh.nodes(), single, counts);
}

/**
 * Bisects every marked cell once, then closes the refinement so that no
 * hanging nodes remain. Children inherit boundary groups of the facets they
 * lie on. With nothing marked the mesh is returned unchanged together with
 * an identity map.
 */
template <int Dim>
std::pair<Mesh<Dim>, TransferMap> bisect(const Mesh<Dim> &mesh, const std::vector<index_t> &marked)
{
    using Cell = typename Mesh<Dim>::Cell;
    for (index_t c : marked)
        if (c < 0 || static_cast<std::size_t>(c) >= mesh.n_cells())
            throw Error(ErrorCategory::invalid_argument, "bisect: marked cell index out of range");
    if (marked.empty())
        return {mesh, TransferMap::identity(mesh.generation(), mesh.n_nodes(), mesh.n_cells())};

    std::vector<Point<Dim>> nodes = mesh.nodes_;
    std::vector<NodeOrigin> origin(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        origin[i].first = static_cast<index_t>(i);

    std::unordered_map<std::uint64_t, index_t> midpoint;
    auto ensure_midpoint = [&](index_t a, index_t b) {
        auto [it, inserted] = midpoint.try_emplace(detail::edge_key(a, b), static_cast<index_t>(nodes.size()));
        if (inserted) {
            nodes.push_back(detail::midpoint<Dim>(nodes[a], nodes[b]));
            origin.push_back({std::min(a, b), std::max(a, b)});
        }
        return it->second;
    };

    std::vector<Cell> order = mesh.order_;
    std::vector<std::uint8_t> tag = mesh.tag_;
    std::vector<std::uint16_t> depth = mesh.depth_;
    std::vector<index_t> parent(mesh.n_cells());
    std::iota(parent.begin(), parent.end(), index_t{0});

    std::vector<index_t> sorted_marks = marked;
    std::sort(sorted_marks.begin(), sorted_marks.end());
    for (index_t c : sorted_marks)
        ensure_midpoint(order[c][0], order[c][tag[c]]);

    auto has_split_edge = [&](const Cell &o) {
        for (int i = 0; i <= Dim; ++i)
            for (int j = i + 1; j <= Dim; ++j)
                if (midpoint.count(detail::edge_key(o[i], o[j])))
                    return true;
        return false;
    };

    constexpr int max_passes = 1000;
    int pass = 0;
    for (bool changed = true; changed; ++pass) {
        if (pass > max_passes)
            throw Error(ErrorCategory::mesh, "bisect: refinement closure did not terminate");
        changed = false;
        std::vector<Cell> next_order;
        std::vector<std::uint8_t> next_tag;
        std::vector<std::uint16_t> next_depth;
        std::vector<index_t> next_parent;
        next_order.reserve(order.size() + order.size() / 4);
        for (std::size_t c = 0; c < order.size(); ++c) {
            const Cell &o = order[c];
            if (!has_split_edge(o)) {
                next_order.push_back(o);
                next_tag.push_back(tag[c]);
                next_depth.push_back(depth[c]);
                next_parent.push_back(parent[c]);
                continue;
            }
            const int k = tag[c];
            const index_t z = ensure_midpoint(o[0], o[k]);
            Cell c1, c2;
            for (int i = 0; i <= Dim; ++i) {
                if (i < k) {
                    c1[i] = o[i];
                    c2[i] = o[i + 1];
                } else if (i == k) {
                    c1[i] = z;
                    c2[i] = z;
                } else {
                    c1[i] = o[i];
                    c2[i] = o[i];
                }
            }
            const auto child_tag = static_cast<std::uint8_t>(k > 1 ? k - 1 : Dim);
            for (const Cell &ch : {c1, c2}) {
                next_order.push_back(ch);
                next_tag.push_back(child_tag);
                next_depth.push_back(static_cast<std::uint16_t>(depth[c] + 1));
                next_parent.push_back(parent[c]);
            }
            changed = true;
        }
        order = std::move(next_order);
        tag = std::move(next_tag);
        depth = std::move(next_depth);
        parent = std::move(next_parent);
    }

    Mesh<Dim> out;
    out.nodes_ = std::move(nodes);
    out.order_ = std::move(order);
    out.tag_ = std::move(tag);
    out.depth_ = std::move(depth);
    out.generation_ = mesh.generation_ + 1;
    out.groups_ = mesh.groups_;
    out.cells_.reserve(out.order_.size());
    for (const auto &o : out.order_)
        out.cells_.push_back(detail::oriented<Dim>(out.nodes_, o));

    // Boundary groups: a child facet lies on the parent facet spanned by the
    // union of the original vertices its nodes descend from.
    const std::size_t n_old = mesh.n_nodes();
    std::vector<std::array<index_t, Dim + 1>> support(out.nodes_.size());
    std::vector<std::uint8_t> support_size(out.nodes_.size(), 0);
    for (std::size_t v = 0; v < out.nodes_.size(); ++v) {
        if (v < n_old) {
            support[v][0] = static_cast<index_t>(v);
            support_size[v] = 1;
            continue;
        }
        std::array<index_t, 2 * (Dim + 1)> merged;
        int n = 0;
        for (index_t e : {origin[v].first, origin[v].second})
            for (int i = 0; i < support_size[e]; ++i)
                merged[n++] = support[e][i];
        std::sort(merged.begin(), merged.begin() + n);
        n = static_cast<int>(std::unique(merged.begin(), merged.begin() + n) - merged.begin());
        for (int i = 0; i < n; ++i)
            support[v][i] = merged[i];
        support_size[v] = static_cast<std::uint8_t>(n);
    }
    std::map<std::array<index_t, Dim>, int> old_groups;
    for (const auto &f : mesh.facets_)
        old_groups[f.nodes] = f.group;

    std::vector<BoundaryGroup<Dim>> no_groups;
    out.facets_ = detail::tag_facets<Dim>(out.nodes_, out.cells_, no_groups);
    for (auto &f : out.facets_) {
        std::array<index_t, 2 * (Dim + 1)> merged;
        int n = 0;
        for (index_t v : f.nodes)
            for (int i = 0; i < support_size[v]; ++i)
                merged[n++] = support[v][i];
        std::sort(merged.begin(), merged.begin() + n);
        n = static_cast<int>(std::unique(merged.begin(), merged.begin() + n) - merged.begin());
        if (n == Dim) {
            std::array<index_t, Dim> key;
            std::copy(merged.begin(), merged.begin() + Dim, key.begin());
            auto it = old_groups.find(key);
            if (it != old_groups.end())
                f.group = it->second;
        }
    }

    TransferMap t;
    t.source_generation = mesh.generation_;
    t.target_generation = out.generation_;
    t.old_node_count = n_old;
    t.old_cell_count = mesh.n_cells();
    t.parent_of_cell = std::move(parent);
    t.node_origin = std::move(origin);
    return {std::move(out), std::move(t)};
}

/// Composes two successive transfer maps (a then b) into one.
inline TransferMap compose(const TransferMap &a, const TransferMap &b)
{
    if (a.target_generation != b.source_generation)
        throw Error(ErrorCategory::invalid_argument, "compose: generation mismatch");
    TransferMap t;
    t.source_generation = a.source_generation;
    t.target_generation = b.target_generation;
    t.old_node_count = a.old_node_count;
    t.old_cell_count = a.old_cell_count;
    t.parent_of_cell.resize(b.parent_of_cell.size());
    for (std::size_t c = 0; c < b.parent_of_cell.size(); ++c)
        t.parent_of_cell[c] = a.parent_of_cell[b.parent_of_cell[c]];
    // node indices are stable under refinement, so origins concatenate
    t.node_origin = a.node_origin;
    t.node_origin.insert(t.node_origin.end(), b.node_origin.begin() + static_cast<std::ptrdiff_t>(b.old_node_count),
                         b.node_origin.end());
    return t;
}

} // namespace phasefrac
