#pragma once

#include "mesh.hpp"

#include <variant>

namespace phasefrac {

/// Diagonal pattern for structured triangulations of a rectangle grid.
enum class Diagonal { uniform, alternating };

/**
 * Straight zero-width cut along the grid plane coord[normal_axis] == level,
 * for coord[along_axis] < tip. Nodes on the cut are duplicated so that the
 * cells on the two sides no longer share facets. The tip node stays shared.
 */
struct Slit
{
    int normal_axis = 1;
    double level = 0.5;
    int along_axis = 0;
    double tip = 0.5;
};

template <int Dim>
struct BoxDomain
{
    Point<Dim> lo{};
    Point<Dim> hi{};
    Diagonal diagonal = Diagonal::uniform; ///< 2D only
    std::optional<Slit> slit;
};

/// Rectangle with a circular hole, meshed by an O-grid of quadrilaterals
/// between the polygonal hole and the outer box.
struct HoleDomain
{
    Point<2> lo{0.0, 0.0};
    Point<2> hi{1.0, 1.0};
    Point<2> center{0.5, 0.5};
    double radius = 0.2;
    int segments = 32; ///< polygon segments; must be a multiple of 4
};

/// Square [0, size]^2 without the lower-right quadrant (cut, size] x [0, cut).
struct LShapeDomain
{
    double size = 500.0;
    double cut = 250.0;
};

namespace detail {

inline int divisions(double extent, double h)
{
    if (!(h > 0.0))
        throw Error(ErrorCategory::invalid_argument, "structured_mesh: h must be positive");
    if (h > extent * (1.0 + 1e-12))
        throw Error(ErrorCategory::invalid_argument, "structured_mesh: h larger than domain extent");
    return std::max(1, static_cast<int>(std::lround(extent / h)));
}

template <int Dim>
inline std::vector<BoundaryGroup<Dim>> box_groups(const Point<Dim> &lo, const Point<Dim> &hi)
{
    std::vector<BoundaryGroup<Dim>> g;
    auto near = [](double a, double b, double scale) { return std::abs(a - b) <= 1e-9 * scale; };
    double scale = 0.0;
    for (int k = 0; k < Dim; ++k)
        scale = std::max(scale, hi[k] - lo[k]);
    const int vertical = Dim - 1;
    g.push_back({"bottom", [=](const Point<Dim> &x) { return near(x[vertical], lo[vertical], scale); }});
    g.push_back({"top", [=](const Point<Dim> &x) { return near(x[vertical], hi[vertical], scale); }});
    g.push_back({"left", [=](const Point<Dim> &x) { return near(x[0], lo[0], scale); }});
    g.push_back({"right", [=](const Point<Dim> &x) { return near(x[0], hi[0], scale); }});
    if constexpr (Dim == 3) {
        g.push_back({"front", [=](const Point<Dim> &x) { return near(x[1], lo[1], scale); }});
        g.push_back({"back", [=](const Point<Dim> &x) { return near(x[1], hi[1], scale); }});
    }
    return g;
}

/// Duplicates nodes on the slit and reconnects cells lying above it.
template <int Dim>
inline void cut_slit(std::vector<Point<Dim>> &nodes, std::vector<std::array<index_t, Dim + 1>> &cells,
                     const Slit &s, double scale)
{
    const double tol = 1e-9 * scale;
    std::vector<index_t> copy_of(nodes.size(), -1);
    const std::size_t n0 = nodes.size();
    for (std::size_t v = 0; v < n0; ++v) {
        const auto &x = nodes[v];
        if (std::abs(x[s.normal_axis] - s.level) <= tol && x[s.along_axis] < s.tip - tol) {
            copy_of[v] = static_cast<index_t>(nodes.size());
            nodes.push_back(x);
        }
    }
    for (auto &cl : cells) {
        double c = 0.0;
        for (index_t v : cl)
            c += nodes[v][s.normal_axis] / (Dim + 1);
        if (c <= s.level)
            continue;
        for (index_t &v : cl)
            if (copy_of[v] >= 0)
                v = copy_of[v];
    }
}

} // namespace detail

/**
 * Structured box mesh with the given number of divisions per axis. In 2D
 * every grid square is split into two triangles; in 3D every grid cube into
 * the six Kuhn tetrahedra sharing its main diagonal, which keeps tetrahedral
 * bisection conforming.
 */
template <int Dim>
Mesh<Dim> box_mesh(const BoxDomain<Dim> &box, const std::array<int, Dim> &n)
{
    for (int k = 0; k < Dim; ++k)
        if (n[k] < 1 || !(box.hi[k] > box.lo[k]))
            throw Error(ErrorCategory::invalid_argument, "box_mesh: invalid extent or division count");
    std::array<int, Dim> stride;
    stride[0] = 1;
    for (int k = 1; k < Dim; ++k)
        stride[k] = stride[k - 1] * (n[k - 1] + 1);
    const int n_nodes = stride[Dim - 1] * (n[Dim - 1] + 1);
    std::vector<Point<Dim>> nodes(n_nodes);
    double scale = 0.0;
    for (int k = 0; k < Dim; ++k)
        scale = std::max(scale, box.hi[k] - box.lo[k]);
    for (int v = 0; v < n_nodes; ++v) {
        int rest = v;
        for (int k = Dim - 1; k >= 0; --k) {
            const int i = rest / stride[k];
            rest -= i * stride[k];
            nodes[v][k] = i == n[k] ? box.hi[k] : box.lo[k] + (box.hi[k] - box.lo[k]) * i / n[k];
        }
    }
    std::vector<std::array<index_t, Dim + 1>> cells;
    if constexpr (Dim == 2) {
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                const index_t a = i + j * stride[1], b = a + 1, c = a + stride[1] + 1, d = a + stride[1];
                const bool flip = box.diagonal == Diagonal::alternating && (i + j) % 2 == 1;
                if (!flip) {
                    cells.push_back({a, b, c});
                    cells.push_back({a, c, d});
                } else {
                    cells.push_back({a, b, d});
                    cells.push_back({b, c, d});
                }
            }
    } else {
        static constexpr std::array<std::array<int, 3>, 6> perms{
            {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        for (int kz = 0; kz < n[2]; ++kz)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    const index_t base = i + j * stride[1] + kz * stride[2];
                    for (const auto &p : perms) {
                        std::array<index_t, 4> cl;
                        index_t v = base;
                        cl[0] = v;
                        for (int s = 0; s < 3; ++s) {
                            v += stride[p[s]];
                            cl[s + 1] = v;
                        }
                        cells.push_back(cl);
                    }
                }
    }
    auto groups = detail::box_groups<Dim>(box.lo, box.hi);
    if (box.slit) {
        detail::cut_slit<Dim>(nodes, cells, *box.slit, scale);
        const Slit s = *box.slit;
        const double tol = 1e-9 * scale;
        groups.insert(groups.begin(), BoundaryGroup<Dim>{"slit", [=](const Point<Dim> &x) {
                                                               return std::abs(x[s.normal_axis] - s.level) <= tol &&
                                                                      x[s.along_axis] < s.tip;
                                                           }});
    }
    return build_mesh<Dim>(std::move(nodes), std::move(cells), groups,
                           Dim == 2 ? RefinementInit::longest_edge : RefinementInit::vertex_order);
}

/// Box mesh with divisions chosen so that the grid spacing is close to h.
template <int Dim>
Mesh<Dim> structured_mesh(const BoxDomain<Dim> &box, double h)
{
    std::array<int, Dim> n;
    for (int k = 0; k < Dim; ++k)
        n[k] = detail::divisions(box.hi[k] - box.lo[k], h);
    return box_mesh<Dim>(box, n);
}

/**
 * O-grid mesh of a rectangle with a polygonal circular hole: `segments`
 * rays from the hole to the outer boundary, each split into
 * round(half-width / h) layers, with every quadrilateral cut into two
 * triangles along the shorter diagonal. Boundary groups: the four box sides
 * and "hole".
 */
inline Mesh<2> structured_mesh(const HoleDomain &dom, double h)
{
    const double width = dom.hi[0] - dom.lo[0];
    const double height = dom.hi[1] - dom.lo[1];
    if (dom.segments < 4 || dom.segments % 4 != 0)
        throw Error(ErrorCategory::invalid_argument, "hole mesh: segment count must be a multiple of 4");
    if (!(dom.radius > 0.0) || dom.center[0] - dom.radius <= dom.lo[0] || dom.center[0] + dom.radius >= dom.hi[0] ||
        dom.center[1] - dom.radius <= dom.lo[1] || dom.center[1] + dom.radius >= dom.hi[1])
        throw Error(ErrorCategory::invalid_argument, "hole mesh: hole must lie strictly inside the box");
    const int layers = detail::divisions(0.5 * std::min(width, height), h);
    const int ns = dom.segments;
    const int per_side = ns / 4;

    // Outer boundary points, counter-clockwise, starting at the lower-right
    // corner so that corners line up with rays at 45 degree multiples.
    std::vector<Point<2>> outer(ns);
    const std::array<Point<2>, 4> corner{
        {{dom.hi[0], dom.lo[1]}, {dom.hi[0], dom.hi[1]}, {dom.lo[0], dom.hi[1]}, {dom.lo[0], dom.lo[1]}}};
    for (int s = 0; s < 4; ++s)
        for (int i = 0; i < per_side; ++i) {
            const double t = static_cast<double>(i) / per_side;
            const auto &a = corner[s];
            const auto &b = corner[(s + 1) % 4];
            outer[s * per_side + i] = {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
        }
    std::vector<Point<2>> nodes;
    nodes.reserve(static_cast<std::size_t>(ns) * (layers + 1));
    for (int l = 0; l <= layers; ++l) {
        const double s = static_cast<double>(l) / layers;
        for (int r = 0; r < ns; ++r) {
            const double ang = -0.25 * M_PI + 2.0 * M_PI * r / ns;
            const Point<2> inner{dom.center[0] + dom.radius * std::cos(ang),
                                 dom.center[1] + dom.radius * std::sin(ang)};
            nodes.push_back(l == layers ? outer[r]
                                        : Point<2>{inner[0] + s * (outer[r][0] - inner[0]),
                                                   inner[1] + s * (outer[r][1] - inner[1])});
        }
    }
    std::vector<std::array<index_t, 3>> cells;
    for (int l = 0; l < layers; ++l)
        for (int r = 0; r < ns; ++r) {
            const index_t a = l * ns + r, b = l * ns + (r + 1) % ns;
            const index_t c = b + ns, d = a + ns;
            const double ac = detail::norm<2>(detail::sub<2>(nodes[a], nodes[c]));
            const double bd = detail::norm<2>(detail::sub<2>(nodes[b], nodes[d]));
            if (ac < bd - 1e-12 || (ac <= bd + 1e-12 && (l + r) % 2 == 0)) {
                cells.push_back({a, b, c});
                cells.push_back({a, c, d});
            } else {
                cells.push_back({a, b, d});
                cells.push_back({b, c, d});
            }
        }
    auto groups = detail::box_groups<2>(dom.lo, dom.hi);
    const auto ctr = dom.center;
    const double rad = dom.radius;
    groups.push_back({"hole", [=](const Point<2> &x) {
                          return std::hypot(x[0] - ctr[0], x[1] - ctr[1]) < 1.05 * rad;
                      }});
    return build_mesh<2>(std::move(nodes), std::move(cells), groups);
}

/**
 * Uniform grid of spacing h over the L-shaped domain, squares split along
 * alternating diagonals. Boundary groups: "bottom" (y = 0), "load" (the
 * inner horizontal edge y = cut within 0.02 size of x = 0.94 size) and
 * "boundary" for everything else.
 */
inline Mesh<2> structured_mesh(const LShapeDomain &dom, double h)
{
    if (!(dom.cut > 0.0 && dom.cut < dom.size))
        throw Error(ErrorCategory::invalid_argument, "L-shape: cut must lie inside the square");
    const int n = detail::divisions(dom.size, h);
    const int nc = static_cast<int>(std::lround(n * dom.cut / dom.size));
    auto coord = [&](int i) { return i == n ? dom.size : dom.size * i / n; };
    std::vector<index_t> id((n + 1) * (n + 1), -1);
    std::vector<Point<2>> nodes;
    auto removed_square = [&](int i, int j) { return i >= nc && j < nc; };
    auto node_used = [&](int i, int j) { return !(i > nc && j < nc); };
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            if (node_used(i, j)) {
                id[i + j * (n + 1)] = static_cast<index_t>(nodes.size());
                nodes.push_back({coord(i), coord(j)});
            }
    std::vector<std::array<index_t, 3>> cells;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (removed_square(i, j))
                continue;
            const index_t a = id[i + j * (n + 1)], b = id[i + 1 + j * (n + 1)];
            const index_t c = id[i + 1 + (j + 1) * (n + 1)], d = id[i + (j + 1) * (n + 1)];
            if ((i + j) % 2 == 0) {
                cells.push_back({a, b, c});
                cells.push_back({a, c, d});
            } else {
                cells.push_back({a, b, d});
                cells.push_back({b, c, d});
            }
        }
    const double tol = 1e-9 * dom.size;
    const double load_x = 0.94 * dom.size, load_half = 0.02 * dom.size;
    const double cut = dom.cut;
    std::vector<BoundaryGroup<2>> groups{
        {"bottom", [=](const Point<2> &x) { return std::abs(x[1]) <= tol; }},
        {"load",
         [=](const Point<2> &x) {
             return std::abs(x[1] - cut) <= tol && x[0] > cut && std::abs(x[0] - load_x) <= load_half;
         }},
        {"boundary", [](const Point<2> &) { return true; }}};
    return build_mesh<2>(std::move(nodes), std::move(cells), groups);
}

/// Bisects every cell `passes` times.
template <int Dim>
Mesh<Dim> refine_uniform(Mesh<Dim> mesh, int passes)
{
    for (int p = 0; p < passes; ++p) {
        std::vector<index_t> all(mesh.n_cells());
        std::iota(all.begin(), all.end(), index_t{0});
        mesh = bisect(mesh, all).first;
    }
    return mesh;
}

} // namespace phasefrac
