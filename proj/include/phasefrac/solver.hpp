#pragma once

#include "amg.hpp"
#include "fem.hpp"
#include "phasefield.hpp"

#include <functional>
#include <map>
#include <string>

namespace phasefrac {

/// Nodal u (Dim values per node), nodal d and per-cell history H.
template <int Dim>
struct SimulationState
{
    std::vector<double> u;
    std::vector<double> d;
    std::vector<double> H;
    std::size_t mesh_generation = 0;

    static SimulationState zero(const Mesh<Dim> &mesh)
    {
        SimulationState s;
        s.u.assign(mesh.n_nodes() * Dim, 0.0);
        s.d.assign(mesh.n_nodes(), 0.0);
        s.H.assign(mesh.n_cells(), 0.0);
        s.mesh_generation = mesh.generation();
        return s;
    }

    void check(const Mesh<Dim> &mesh) const
    {
        if (mesh_generation != mesh.generation() || u.size() != mesh.n_nodes() * Dim || d.size() != mesh.n_nodes() ||
            H.size() != mesh.n_cells())
            throw Error(ErrorCategory::invalid_argument, "simulation state does not match the mesh generation");
    }
};

/// Dirichlet condition on one displacement component of a boundary group.
/// Loaded conditions take the current load value, fixed ones zero.
struct DisplacementBc
{
    std::string group;
    int component = 0;
    bool loaded = false;
};

struct BoundaryConditions
{
    std::vector<DisplacementBc> displacement;
    bool phase_zero_on_boundary = false;
    double load_value = 0.0;

    /// Direction of the loaded conditions; -1 when nothing is loaded.
    int load_component() const
    {
        for (const auto &bc : displacement)
            if (bc.loaded)
                return bc.component;
        return -1;
    }
};

/// Spaces, cached patterns and boundary dofs of one mesh generation.
template <int Dim>
struct Discretization
{
    std::size_t mesh_generation = 0;
    DofMap<Dim> scalar;
    DofMap<Dim> vector;
    std::vector<index_t> fixed_dofs;  ///< constrained displacement dofs, sorted
    std::vector<char> dof_loaded;     ///< per constrained dof: prescribed by the load
    std::vector<index_t> loaded_nodes;
    int load_component = -1;
    std::vector<index_t> phase_fixed; ///< nodes with d = 0 prescribed
    std::vector<double> rigid_modes;  ///< near-nullspace of the displacement operator

    Discretization() = default;

    Discretization(const Mesh<Dim> &mesh, const BoundaryConditions &bc) : mesh_generation(mesh.generation())
    {
        scalar = p1_space(mesh, 1);
        vector = p1_space(mesh, Dim, scalar.geometry);
        std::map<index_t, char> dofs;
        for (const auto &c : bc.displacement) {
            if (c.component < 0 || c.component >= Dim)
                throw Error(ErrorCategory::invalid_argument, "boundary condition component out of range");
            for (index_t v : mesh.nodes_in_group(c.group)) {
                auto &flag = dofs[v * Dim + c.component];
                flag = flag || c.loaded;
            }
        }
        for (const auto &[dof, loaded] : dofs) {
            fixed_dofs.push_back(dof);
            dof_loaded.push_back(loaded);
        }
        load_component = bc.load_component();
        for (std::size_t k = 0; k < fixed_dofs.size(); ++k)
            if (dof_loaded[k] && fixed_dofs[k] % Dim == load_component)
                loaded_nodes.push_back(fixed_dofs[k] / Dim);
        if (bc.phase_zero_on_boundary)
            phase_fixed = mesh.boundary_nodes();
        rigid_modes = rigid_body_modes<Dim>(mesh.nodes());
    }

    void check(const SimulationState<Dim> &s) const
    {
        if (s.mesh_generation != mesh_generation || s.d.size() != scalar.n_dofs || s.H.size() != scalar.n_cells())
            throw Error(ErrorCategory::invalid_argument, "simulation state does not match the discretization");
    }

    Constraints displacement_constraints(double load_value) const
    {
        Constraints c;
        for (std::size_t k = 0; k < fixed_dofs.size(); ++k)
            c.emplace_back(fixed_dofs[k], dof_loaded[k] ? load_value : 0.0);
        return c;
    }

    Constraints homogeneous_displacement() const
    {
        Constraints c;
        for (index_t dof : fixed_dofs)
            c.emplace_back(dof, 0.0);
        return c;
    }

    Constraints homogeneous_phase() const
    {
        Constraints c;
        for (index_t v : phase_fixed)
            c.emplace_back(v, 0.0);
        return c;
    }
};

/// Per-cell g(d) evaluated at the cell mean of nodal d.
template <int Dim>
std::vector<double> cell_degradation(const Discretization<Dim> &disc, std::span<const double> d,
                                     const MaterialParams &p)
{
    std::vector<double> g(disc.scalar.n_cells());
    for (std::size_t c = 0; c < g.size(); ++c) {
        double mean = 0.0;
        for (index_t v : disc.scalar.dofs(c))
            mean += d[v];
        g[c] = degradation(mean / (Dim + 1), p.eps_residual).g;
    }
    return g;
}

template <int Dim>
SparseMatrix tangent_displacement(const Discretization<Dim> &disc, const SimulationState<Dim> &s,
                                  const MaterialParams &p)
{
    disc.check(s);
    return elasticity_matrix(disc.vector, p.lambda, p.mu, cell_degradation(disc, s.d, p));
}

/// 2 M_H + Gc l0 K + (Gc / l0) M in a single assembly pass.
template <int Dim>
SparseMatrix tangent_phase(const Discretization<Dim> &disc, const SimulationState<Dim> &s, const MaterialParams &p)
{
    disc.check(s);
    const auto &geo = *disc.scalar.geometry;
    return disc.scalar.pattern->assemble(disc.scalar.n_cells(), [&](std::size_t c, std::span<double> ke) {
        const double m = (2.0 * s.H[c] + p.Gc / p.l0) * geo.measure[c];
        const double k = p.Gc * p.l0 * geo.measure[c];
        const auto &g = geo.grad[c];
        for (int a = 0; a <= Dim; ++a)
            for (int b = 0; b <= Dim; ++b)
                ke[a * (Dim + 1) + b] = m * detail::mass_moment<Dim>(a == b) + k * detail::dot<Dim>(g[a], g[b]);
    });
}

/// Internal force (sigma(u), eps(phi)) before any Dirichlet elimination.
template <int Dim>
std::vector<double> internal_force(const Discretization<Dim> &disc, const SimulationState<Dim> &s,
                                   const MaterialParams &p)
{
    return tangent_displacement(disc, s, p) * s.u;
}

namespace detail {

inline void zero_rows(std::vector<double> &r, const std::vector<index_t> &rows)
{
    for (index_t i : rows)
        r[i] = 0.0;
}

inline double norm2(std::span<const double> v)
{
    return std::sqrt(dot(v, v));
}

} // namespace detail

/// R0 = -(sigma(u), eps(phi)) with constrained rows zeroed; body force and traction vanish in all presets.
template <int Dim>
std::vector<double> residual_displacement(const Discretization<Dim> &disc, const SimulationState<Dim> &s,
                                          const MaterialParams &p)
{
    auto r = internal_force(disc, s, p);
    for (double &x : r)
        x = -x;
    detail::zero_rows(r, disc.fixed_dofs);
    return r;
}

/// Load vector b_i = (2H, phi_i), exact for per-cell constant H.
template <int Dim>
std::vector<double> phase_load(const Discretization<Dim> &disc, std::span<const double> H)
{
    std::vector<double> b(disc.scalar.n_dofs, 0.0);
    const auto &geo = *disc.scalar.geometry;
    for (std::size_t c = 0; c < H.size(); ++c) {
        const double w = 2.0 * H[c] * geo.measure[c] / (Dim + 1);
        for (index_t v : disc.scalar.dofs(c))
            b[v] += w;
    }
    return b;
}

/// R1 = 2((1 - d) H, phi) - Gc l0 (grad d, grad phi) - (Gc / l0)(d, phi), constrained rows zeroed.
template <int Dim>
std::vector<double> residual_phase(const Discretization<Dim> &disc, const SimulationState<Dim> &s,
                                   const MaterialParams &p)
{
    auto r = phase_load(disc, s.H);
    const auto kd = tangent_phase(disc, s, p) * s.d;
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] -= kd[i];
    detail::zero_rows(r, disc.phase_fixed);
    return r;
}

/// Tensile energy density e+ of every cell.
template <int Dim>
std::vector<double> tensile_energy(const Discretization<Dim> &disc, std::span<const double> u, const MaterialParams &p)
{
    const auto &geo = *disc.scalar.geometry;
    std::vector<double> e(geo.n_cells());
    std::array<double, (Dim + 1) * Dim> cu;
    for (std::size_t c = 0; c < e.size(); ++c) {
        const auto dofs = disc.vector.dofs(c);
        for (std::size_t k = 0; k < cu.size(); ++k)
            cu[k] = u[dofs[k]];
        e[c] = spectral_split(strain_from_displacement<Dim>(cu, geo.grad[c]), p.lambda, p.mu).e_plus;
    }
    return e;
}

/// Sum of the internal force over `loaded_nodes` in direction `axis`.
template <int Dim>
double reaction_force(std::span<const double> internal, const std::vector<index_t> &loaded_nodes, int axis)
{
    if (axis < 0 || axis >= Dim)
        throw Error(ErrorCategory::invalid_argument, "reaction_force: axis out of range");
    double r = 0.0;
    for (index_t v : loaded_nodes)
        r += internal[v * Dim + axis];
    return r;
}

template <int Dim>
double reaction_force(const Discretization<Dim> &disc, const SimulationState<Dim> &s, const MaterialParams &p,
                      const std::vector<index_t> &loaded_nodes, int axis)
{
    if (loaded_nodes.empty())
        throw Error(ErrorCategory::invalid_argument, "reaction_force: no loaded nodes");
    return reaction_force<Dim>(internal_force(disc, s, p), loaded_nodes, axis);
}

struct StepReport
{
    double load_value = 0.0;
    double reaction = 0.0;
    std::size_t iterations = 0;
    std::size_t n_cells = 0;
    double r0 = 0.0; ///< final relative displacement residual
    double r1 = 0.0; ///< final relative phase residual
    bool converged = false;
    int adapt_passes = 0;
    double d_min = 0.0;
    double d_max = 0.0;
    std::size_t cg_displacement = 0; ///< total inner iterations of the displacement solves
    std::size_t cg_phase = 0;        ///< total inner iterations of the phase solves
};

/// Refines the mesh and transfers the state in place; returns whether the mesh changed.
template <int Dim>
using AdaptHook = std::function<bool(Mesh<Dim> &, SimulationState<Dim> &)>;

template <int Dim>
struct StepOptions
{
    double tol = 1e-5;
    std::size_t max_iter = 50;
    double cg_tol = 1e-10;
    Preconditioner preconditioner = Preconditioner::amg;
    bool freeze_phase = false;
    int max_adapt_passes = 5;
    AdaptHook<Dim> adapt;
};

/// Keeps one Discretization per mesh generation.
template <int Dim>
class DiscretizationCache
{
public:
    explicit DiscretizationCache(BoundaryConditions bc) : bc_(std::move(bc)) {}

    const Discretization<Dim> &get(const Mesh<Dim> &mesh)
    {
        if (!disc_ || disc_->mesh_generation != mesh.generation() || disc_->scalar.n_dofs != mesh.n_nodes() ||
            disc_->scalar.n_cells() != mesh.n_cells())
            disc_ = std::make_unique<Discretization<Dim>>(mesh, bc_);
        return *disc_;
    }

    const BoundaryConditions &conditions() const { return bc_; }

private:
    BoundaryConditions bc_;
    std::unique_ptr<Discretization<Dim>> disc_;
};

namespace detail {

inline double ratio(double value, double baseline)
{
    return baseline < 1e-14 ? 0.0 : value / baseline;
}

/// Block structure handed to the multigrid preconditioner.
struct NearNullspace
{
    int block = 1;
    int columns = 1;
    const std::vector<double> *vectors = nullptr; ///< null: constants
};

/// Solves A x = b with homogeneous constraints applied to a copy of A.
inline CgResult constrained_solve(SparseMatrix a, std::vector<double> b, const Constraints &fixed, double tol,
                                  Preconditioner pc, const NearNullspace &ns, const char *what)
{
    apply_dirichlet(a, b, fixed);
    CgResult res;
    if (pc == Preconditioner::amg) {
        auto modes = ns.vectors ? *ns.vectors : std::vector<double>(a.n_rows() * ns.columns, 1.0);
        const AmgPreconditioner amg(a, ns.block, std::move(modes), ns.columns);
        res = cg_solve(a, b, amg, tol);
    } else {
        res = cg_solve(a, b, tol, 0, {}, pc);
    }
    if (!res.converged)
        throw Error(ErrorCategory::solver, std::string(what) + ": conjugate gradients did not converge (relative residual " +
                                               std::to_string(res.relative_residual) + ")");
    return res;
}

} // namespace detail

/**
 * One load step of the staggered scheme: per iterate a displacement
 * correction at fixed d, the history update, and a phase correction at
 * fixed u, followed by an optional adaptation pass. Convergence is tested
 * on the residuals after the update relative to those of the first iterate;
 * after the mesh changes the baselines are taken again and the test is
 * skipped for that iterate.
 */
template <int Dim>
StepReport staggered_step(Mesh<Dim> &mesh, SimulationState<Dim> &s, const MaterialParams &p,
                          DiscretizationCache<Dim> &cache, double load_value, const StepOptions<Dim> &opt = {})
{
    s.check(mesh);
    StepReport rep;
    rep.load_value = load_value;
    double base0 = 0.0, base1 = 0.0;
    bool rebaseline = true;
    std::size_t since_baseline = 0;
    std::vector<double> internal;
    std::optional<SparseMatrix> ku; // tangent at the current state, reused by the next iterate
    for (;;) {
        const auto &disc = cache.get(mesh);
        ++rep.iterations;
        ++since_baseline;
        for (const auto &[dof, value] : disc.displacement_constraints(load_value))
            s.u[dof] = value;

        if (!ku)
            ku = tangent_displacement(disc, s, p);
        auto r0 = *ku * s.u;
        for (double &x : r0)
            x = -x;
        detail::zero_rows(r0, disc.fixed_dofs);
        if (rebaseline)
            base0 = detail::norm2(r0);
        auto du = detail::constrained_solve(std::move(*ku), std::move(r0), disc.homogeneous_displacement(),
                                            opt.cg_tol, opt.preconditioner,
                                            {Dim, Dim == 2 ? 3 : 6, &disc.rigid_modes}, "displacement solve");
        rep.cg_displacement += du.iterations;
        for (std::size_t i = 0; i < s.u.size(); ++i)
            s.u[i] += du.x[i];

        std::vector<double> r1;
        SparseMatrix kd;
        if (!opt.freeze_phase) {
            s.H = update_history(s.H, tensile_energy(disc, s.u, p));
            kd = tangent_phase(disc, s, p);
            r1 = phase_load(disc, s.H);
            const auto kdd = kd * s.d;
            for (std::size_t i = 0; i < r1.size(); ++i)
                r1[i] -= kdd[i];
            detail::zero_rows(r1, disc.phase_fixed);
            if (rebaseline)
                base1 = detail::norm2(r1);
            const auto dd = detail::constrained_solve(kd, r1, disc.homogeneous_phase(), opt.cg_tol, opt.preconditioner,
                                                      {}, "phase solve");
            rep.cg_phase += dd.iterations;
            for (std::size_t i = 0; i < s.d.size(); ++i)
                s.d[i] += dd.x[i];
        }
        rebaseline = false;

        // residuals after the update
        ku = tangent_displacement(disc, s, p);
        internal = *ku * s.u;
        auto post0 = internal;
        detail::zero_rows(post0, disc.fixed_dofs);
        rep.r0 = detail::ratio(detail::norm2(post0), base0);
        rep.r1 = 0.0;
        if (!opt.freeze_phase) {
            auto post1 = phase_load(disc, s.H);
            const auto kdd = kd * s.d;
            for (std::size_t i = 0; i < post1.size(); ++i)
                post1[i] -= kdd[i];
            detail::zero_rows(post1, disc.phase_fixed);
            rep.r1 = detail::ratio(detail::norm2(post1), base1);
        }

        if (opt.adapt && rep.adapt_passes < opt.max_adapt_passes && opt.adapt(mesh, s)) {
            ++rep.adapt_passes;
            ku.reset();
            rebaseline = true;
            since_baseline = 0;
            continue;
        }
        if (std::max(rep.r0, rep.r1) < opt.tol) {
            rep.converged = true;
            break;
        }
        if (since_baseline >= opt.max_iter)
            break;
    }
    const auto &disc = cache.get(mesh);
    rep.n_cells = mesh.n_cells();
    if (disc.load_component >= 0 && !disc.loaded_nodes.empty())
        rep.reaction = reaction_force<Dim>(internal, disc.loaded_nodes, disc.load_component);
    const auto [lo, hi] = std::minmax_element(s.d.begin(), s.d.end());
    rep.d_min = *lo;
    rep.d_max = *hi;
    return rep;
}

} // namespace phasefrac
