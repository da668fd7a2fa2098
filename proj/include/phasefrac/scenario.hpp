#pragma once

#include "recovery.hpp"
#include "structured.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <variant>

namespace phasefrac {

/// `steps` equal load increments.
struct Segment
{
    int steps = 0;
    double increment = 0.0;
};

using Geometry = std::variant<BoxDomain<2>, BoxDomain<3>, HoleDomain, LShapeDomain>;

struct Scenario
{
    std::string name = "custom";
    Geometry geometry = BoxDomain<2>{{0.0, 0.0}, {1.0, 1.0}, Diagonal::uniform, std::nullopt};
    double h = 0.1;
    std::array<int, 3> divisions{0, 0, 0}; ///< explicit box divisions; zero means derived from h
    MaterialParams material;
    BoundaryConditions bc;
    std::vector<Segment> schedule;
    bool adaptive = true;
    AdaptivityOptions adaptivity; ///< h_min <= 0 means l0 / 4
    double tol = 1e-5;
    std::size_t max_iter = 50;
    double cg_tol = 1e-10;
    Preconditioner preconditioner = Preconditioner::amg;
    int max_adapt_passes = 5;
    bool freeze_phase = false;
    int vtk_every = 0; ///< 0: no VTK output

    int dim() const { return std::holds_alternative<BoxDomain<3>>(geometry) ? 3 : 2; }

    std::size_t n_steps() const
    {
        std::size_t n = 0;
        for (const auto &s : schedule)
            n += static_cast<std::size_t>(s.steps);
        return n;
    }

    double total_displacement() const
    {
        double t = 0.0;
        for (const auto &s : schedule)
            t += s.steps * s.increment;
        return t;
    }

    /// Applied displacement after every step, accumulated in schedule order.
    std::vector<double> load_values() const
    {
        std::vector<double> v;
        v.reserve(n_steps());
        double u = 0.0;
        for (const auto &s : schedule)
            for (int k = 0; k < s.steps; ++k)
                v.push_back(u += s.increment);
        return v;
    }

    double h_min() const { return adaptivity.h_min > 0.0 ? adaptivity.h_min : material.l0 / 4.0; }

    std::vector<std::string> group_names() const
    {
        std::vector<std::string> g;
        if (std::holds_alternative<LShapeDomain>(geometry))
            return {"bottom", "load", "boundary"};
        g = {"bottom", "top", "left", "right"};
        if (dim() == 3) {
            g.push_back("front");
            g.push_back("back");
        }
        if (std::holds_alternative<HoleDomain>(geometry))
            g.push_back("hole");
        const auto *b2 = std::get_if<BoxDomain<2>>(&geometry);
        const auto *b3 = std::get_if<BoxDomain<3>>(&geometry);
        if ((b2 && b2->slit) || (b3 && b3->slit))
            g.push_back("slit");
        return g;
    }

    /// Throws Error(config) if the scenario cannot be run.
    void validate() const
    {
        auto fail = [&](const std::string &m) { throw Error(ErrorCategory::config, name + ": " + m); };
        try {
            material.validate();
        } catch (const Error &e) {
            fail(e.what());
        }
        if (!(h > 0.0))
            fail("h must be positive");
        for (const auto &s : schedule) {
            if (s.steps < 0)
                fail("segment step count must be non-negative");
            if (!std::isfinite(s.increment))
                fail("segment increment must be finite");
        }
        if (!(adaptivity.theta > 0.0 && adaptivity.theta < 1.0))
            fail("theta must lie in (0, 1)");
        if (!(tol > 0.0) || !(cg_tol > 0.0) || max_iter == 0)
            fail("solver tolerances must be positive");
        if (max_adapt_passes < 0 || vtk_every < 0)
            fail("counts must be non-negative");
        const auto groups = group_names();
        int loaded = -1;
        for (const auto &c : bc.displacement) {
            if (std::find(groups.begin(), groups.end(), c.group) == groups.end())
                fail("unknown boundary group '" + c.group + "'");
            if (c.component < 0 || c.component >= dim())
                fail("displacement component out of range");
            if (c.loaded) {
                if (loaded >= 0 && loaded != c.component)
                    fail("all loaded conditions must act in one direction");
                loaded = c.component;
            }
        }
        std::visit(
            [&](const auto &g) {
                using G = std::decay_t<decltype(g)>;
                if constexpr (std::is_same_v<G, BoxDomain<2>> || std::is_same_v<G, BoxDomain<3>>) {
                    for (std::size_t k = 0; k < g.lo.size(); ++k)
                        if (!(g.hi[k] > g.lo[k]))
                            fail("box must have positive extent");
                    if (g.slit) {
                        const int n = static_cast<int>(g.lo.size());
                        const auto &s = *g.slit;
                        if (s.normal_axis < 0 || s.normal_axis >= n || s.along_axis < 0 || s.along_axis >= n ||
                            s.normal_axis == s.along_axis)
                            fail("slit axes invalid");
                        if (!(s.level > g.lo[s.normal_axis] && s.level < g.hi[s.normal_axis]))
                            fail("slit level outside the box");
                    }
                } else if constexpr (std::is_same_v<G, HoleDomain>) {
                    if (!(g.hi[0] > g.lo[0] && g.hi[1] > g.lo[1]) || !(g.radius > 0.0) ||
                        g.center[0] - g.radius <= g.lo[0] || g.center[0] + g.radius >= g.hi[0] ||
                        g.center[1] - g.radius <= g.lo[1] || g.center[1] + g.radius >= g.hi[1])
                        fail("hole must lie strictly inside the box");
                    if (g.segments < 4 || g.segments % 4 != 0)
                        fail("hole segments must be a positive multiple of 4");
                } else {
                    if (!(g.size > 0.0 && g.cut > 0.0 && g.cut < g.size))
                        fail("L-shape cut must lie inside the square");
                }
            },
            geometry);
    }
};

namespace detail {

inline std::vector<DisplacementBc> bcs(std::initializer_list<DisplacementBc> l)
{
    return l;
}

} // namespace detail

/// Staggered iteration cap of the presets. Once a crack runs, one load step
/// can take a few hundred alternations before the residuals settle.
inline constexpr std::size_t benchmark_max_iter = 1000;

/// Plate with a rigid circular inclusion pulled at the top edge.
inline Scenario circular_notch_scenario()
{
    Scenario s;
    s.name = "circular-notch";
    s.geometry = HoleDomain{};
    s.h = 0.05;
    const auto lame = lame_from_E_nu(200.0, 0.2);
    s.material = {1.0, 0.02, lame.lambda, lame.mu, 1e-10};
    s.bc.displacement = detail::bcs({{"top", 1, true}, {"hole", 0, false}, {"hole", 1, false}});
    s.bc.phase_zero_on_boundary = true;
    s.schedule = {{5, 1.4e-2}, {25, 2.2e-3}};
    s.max_iter = benchmark_max_iter;
    return s;
}

inline Scenario notch_square(const std::string &name)
{
    Scenario s;
    s.name = name;
    s.geometry = BoxDomain<2>{{0.0, 0.0}, {1.0, 1.0}, Diagonal::alternating, Slit{1, 0.5, 0, 0.5}};
    s.h = 1.0 / 32.0;
    s.material = {2.7e-3, 1.33e-2, 121.15, 80.77, 1e-10};
    s.max_iter = benchmark_max_iter;
    return s;
}

/// Unit square with a horizontal slit, pulled vertically.
inline Scenario notch_tension_scenario()
{
    auto s = notch_square("notch-tension");
    s.bc.displacement = detail::bcs({{"bottom", 0, false}, {"bottom", 1, false}, {"top", 1, true}});
    s.schedule = {{500, 1e-5}, {1100, 1e-6}};
    return s;
}

/// Unit square with a horizontal slit, sheared along the top edge.
inline Scenario notch_shear_scenario()
{
    auto s = notch_square("notch-shear");
    s.bc.displacement =
        detail::bcs({{"bottom", 0, false}, {"bottom", 1, false}, {"top", 0, true}, {"top", 1, false}});
    s.schedule = {{1700, 1e-5}};
    return s;
}

/// L-shaped panel loaded up, down and up again near the inner corner.
inline Scenario lshape_scenario()
{
    Scenario s;
    s.name = "lshape";
    s.geometry = LShapeDomain{};
    s.h = 10.0;
    s.material = {8.9e-5, 1.88, 6.16, 10.95, 1e-10};
    s.bc.displacement = detail::bcs({{"bottom", 0, false}, {"bottom", 1, false}, {"load", 1, true}});
    s.schedule = {{30, 1e-2}, {50, -1e-2}, {120, 1e-2}};
    s.max_iter = benchmark_max_iter;
    return s;
}

/// Block with a half-depth planar slit at mid height, pulled along z.
inline Scenario slit3d_scenario()
{
    Scenario s;
    s.name = "slit3d";
    s.geometry = BoxDomain<3>{{0.0, 0.0, 0.0}, {10.0, 8.0, 10.0}, Diagonal::uniform, Slit{2, 5.0, 0, 5.0}};
    s.h = 0.5;
    const auto lame = lame_from_E_nu(20.8, 0.3);
    s.material = {5e-4, 0.2, lame.lambda, lame.mu, 1e-10};
    s.bc.displacement =
        detail::bcs({{"bottom", 0, false}, {"bottom", 1, false}, {"bottom", 2, false}, {"top", 2, true}});
    s.schedule = {{450, 1e-4}};
    s.max_iter = benchmark_max_iter;
    return s;
}

/// Thin slab of the 3D block on a coarse grid for smoke runs.
inline Scenario slit3d_coarse_scenario()
{
    auto s = slit3d_scenario();
    s.name = "slit3d-coarse";
    s.geometry = BoxDomain<3>{{0.0, 0.0, 0.0}, {10.0, 2.0, 10.0}, Diagonal::uniform, Slit{2, 5.0, 0, 5.0}};
    s.h = 1.0;
    s.divisions = {10, 2, 10};
    s.adaptivity.h_min = 0.25;
    s.schedule = {{50, 1e-4}};
    return s;
}

inline const std::vector<std::string> &builtin_scenarios()
{
    static const std::vector<std::string> names{"circular-notch", "notch-tension", "notch-shear",
                                                "lshape",         "slit3d",        "slit3d-coarse"};
    return names;
}

inline std::optional<Scenario> builtin_scenario(const std::string &name)
{
    if (name == "circular-notch")
        return circular_notch_scenario();
    if (name == "notch-tension")
        return notch_tension_scenario();
    if (name == "notch-shear")
        return notch_shear_scenario();
    if (name == "lshape" || name == "l-shape")
        return lshape_scenario();
    if (name == "slit3d" || name == "3d")
        return slit3d_scenario();
    if (name == "slit3d-coarse")
        return slit3d_coarse_scenario();
    return std::nullopt;
}

namespace detail {

struct ConfigLine
{
    int line;
    std::string key;
    std::vector<std::string> values;
};

inline std::string trim(const std::string &s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

class ConfigReader
{
public:
    ConfigReader(std::string source, const ConfigLine &l) : source_(std::move(source)), l_(l) {}

    [[noreturn]] void fail(const std::string &msg) const
    {
        throw Error(ErrorCategory::config, source_ + ":" + std::to_string(l_.line) + ": " + l_.key + ": " + msg);
    }

    void arity(std::size_t lo, std::size_t hi) const
    {
        if (l_.values.size() < lo || l_.values.size() > hi)
            fail(lo == hi ? "expected " + std::to_string(lo) + " value(s)"
                          : "expected " + std::to_string(lo) + " to " + std::to_string(hi) + " values");
    }

    std::size_t size() const { return l_.values.size(); }
    const std::string &str(std::size_t i) const { return l_.values.at(i); }

    double num(std::size_t i) const
    {
        const auto &s = l_.values.at(i);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size() || !std::isfinite(v))
                fail("invalid number '" + s + "'");
            return v;
        } catch (const std::logic_error &) {
            fail("invalid number '" + s + "'");
        }
    }

    long integer(std::size_t i) const
    {
        const auto &s = l_.values.at(i);
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size())
                fail("invalid integer '" + s + "'");
            return v;
        } catch (const std::logic_error &) {
            fail("invalid integer '" + s + "'");
        }
    }

    bool boolean(std::size_t i) const
    {
        const auto &s = l_.values.at(i);
        if (s == "true" || s == "yes" || s == "1")
            return true;
        if (s == "false" || s == "no" || s == "0")
            return false;
        fail("invalid boolean '" + s + "'");
    }

    int component(std::size_t i) const
    {
        const auto &s = l_.values.at(i);
        if (s == "x" || s == "0")
            return 0;
        if (s == "y" || s == "1")
            return 1;
        if (s == "z" || s == "2")
            return 2;
        fail("invalid component '" + s + "'");
    }

private:
    std::string source_;
    const ConfigLine &l_;
};

} // namespace detail

/**
 * Parses a `key = value...` document. Lines starting with '#' and blank
 * lines are skipped; `dirichlet` and `segment` may repeat, every other key
 * may appear once. `base = <builtin>` starts from a preset and must come
 * first. Errors carry the source name and line number.
 */
inline Scenario parse_scenario(const std::string &text, const std::string &source = "<config>")
{
    std::vector<detail::ConfigLine> lines;
    {
        std::istringstream in(text);
        std::string raw;
        int n = 0;
        while (std::getline(in, raw)) {
            ++n;
            const auto hash = raw.find('#');
            const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (s.empty())
                continue;
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorCategory::config, source + ":" + std::to_string(n) + ": expected 'key = value'");
            detail::ConfigLine cl{n, detail::trim(s.substr(0, eq)), {}};
            std::istringstream vs(s.substr(eq + 1));
            for (std::string tok; vs >> tok;)
                cl.values.push_back(tok);
            if (cl.key.empty() || cl.values.empty())
                throw Error(ErrorCategory::config, source + ":" + std::to_string(n) + ": expected 'key = value'");
            lines.push_back(std::move(cl));
        }
    }

    Scenario s;
    std::string geometry_kind;
    int box_dim = 2;
    std::vector<double> lo, hi, center;
    std::optional<Slit> slit;
    Diagonal diagonal = Diagonal::uniform;
    double radius = -1.0, size = -1.0, cut = -1.0;
    int segments = -1;
    std::optional<double> E, nu, lambda, mu;
    bool replaced_bc = false, replaced_schedule = false;
    std::set<std::string> seen;
    static const std::set<std::string> repeatable{"dirichlet", "segment"};

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto &l = lines[i];
        detail::ConfigReader r(source, l);
        if (!repeatable.count(l.key) && !seen.insert(l.key).second)
            r.fail("duplicate key");
        const auto vec = [&]() {
            r.arity(2, 3);
            std::vector<double> v;
            for (std::size_t k = 0; k < r.size(); ++k)
                v.push_back(r.num(k));
            return v;
        };
        if (l.key == "base") {
            r.arity(1, 1);
            if (i != 0)
                r.fail("must be the first key");
            auto b = builtin_scenario(r.str(0));
            if (!b)
                r.fail("unknown builtin scenario '" + r.str(0) + "'");
            s = *b;
        } else if (l.key == "name") {
            r.arity(1, 1);
            s.name = r.str(0);
        } else if (l.key == "geometry") {
            r.arity(1, 1);
            geometry_kind = r.str(0);
            if (geometry_kind != "box" && geometry_kind != "hole" && geometry_kind != "lshape")
                r.fail("expected box, hole or lshape");
        } else if (l.key == "dim") {
            r.arity(1, 1);
            box_dim = static_cast<int>(r.integer(0));
            if (box_dim != 2 && box_dim != 3)
                r.fail("expected 2 or 3");
        } else if (l.key == "lo") {
            lo = vec();
        } else if (l.key == "hi") {
            hi = vec();
        } else if (l.key == "center") {
            center = vec();
        } else if (l.key == "diagonal") {
            r.arity(1, 1);
            if (r.str(0) == "uniform")
                diagonal = Diagonal::uniform;
            else if (r.str(0) == "alternating")
                diagonal = Diagonal::alternating;
            else
                r.fail("expected uniform or alternating");
        } else if (l.key == "slit") {
            r.arity(4, 4);
            slit = Slit{r.component(0), r.num(1), r.component(2), r.num(3)};
        } else if (l.key == "radius") {
            r.arity(1, 1);
            radius = r.num(0);
        } else if (l.key == "segments") {
            r.arity(1, 1);
            segments = static_cast<int>(r.integer(0));
        } else if (l.key == "size") {
            r.arity(1, 1);
            size = r.num(0);
        } else if (l.key == "cut") {
            r.arity(1, 1);
            cut = r.num(0);
        } else if (l.key == "h") {
            r.arity(1, 1);
            s.h = r.num(0);
        } else if (l.key == "divisions") {
            r.arity(2, 3);
            s.divisions = {0, 0, 0};
            for (std::size_t k = 0; k < r.size(); ++k) {
                s.divisions[k] = static_cast<int>(r.integer(k));
                if (s.divisions[k] <= 0)
                    r.fail("divisions must be positive");
            }
        } else if (l.key == "Gc") {
            r.arity(1, 1);
            s.material.Gc = r.num(0);
        } else if (l.key == "l0") {
            r.arity(1, 1);
            s.material.l0 = r.num(0);
        } else if (l.key == "lambda") {
            r.arity(1, 1);
            lambda = r.num(0);
        } else if (l.key == "mu") {
            r.arity(1, 1);
            mu = r.num(0);
        } else if (l.key == "E") {
            r.arity(1, 1);
            E = r.num(0);
        } else if (l.key == "nu") {
            r.arity(1, 1);
            nu = r.num(0);
        } else if (l.key == "eps_residual") {
            r.arity(1, 1);
            s.material.eps_residual = r.num(0);
        } else if (l.key == "dirichlet") {
            r.arity(3, 3);
            if (!replaced_bc) {
                s.bc.displacement.clear();
                replaced_bc = true;
            }
            if (r.str(2) != "fixed" && r.str(2) != "load")
                r.fail("expected fixed or load");
            s.bc.displacement.push_back({r.str(0), r.component(1), r.str(2) == "load"});
        } else if (l.key == "phase_bc") {
            r.arity(1, 1);
            if (r.str(0) == "natural")
                s.bc.phase_zero_on_boundary = false;
            else if (r.str(0) == "zero")
                s.bc.phase_zero_on_boundary = true;
            else
                r.fail("expected natural or zero");
        } else if (l.key == "segment") {
            r.arity(2, 2);
            if (!replaced_schedule) {
                s.schedule.clear();
                replaced_schedule = true;
            }
            const long n = r.integer(0);
            if (n < 0)
                r.fail("step count must be non-negative");
            s.schedule.push_back({static_cast<int>(n), r.num(1)});
        } else if (l.key == "adaptive") {
            r.arity(1, 1);
            s.adaptive = r.boolean(0);
        } else if (l.key == "recovery") {
            r.arity(1, 1);
            try {
                s.adaptivity.method = parse_recovery(r.str(0));
            } catch (const Error &e) {
                r.fail(e.what());
            }
        } else if (l.key == "marking") {
            r.arity(1, 1);
            try {
                s.adaptivity.marking = parse_marking(r.str(0));
            } catch (const Error &e) {
                r.fail(e.what());
            }
        } else if (l.key == "theta") {
            r.arity(1, 1);
            s.adaptivity.theta = r.num(0);
        } else if (l.key == "h_min") {
            r.arity(1, 1);
            s.adaptivity.h_min = r.num(0);
            if (!(s.adaptivity.h_min > 0.0))
                r.fail("must be positive");
        } else if (l.key == "tol") {
            r.arity(1, 1);
            s.tol = r.num(0);
        } else if (l.key == "cg_tol") {
            r.arity(1, 1);
            s.cg_tol = r.num(0);
        } else if (l.key == "preconditioner") {
            r.arity(1, 1);
            if (r.str(0) == "jacobi")
                s.preconditioner = Preconditioner::jacobi;
            else if (r.str(0) == "ic0")
                s.preconditioner = Preconditioner::ic0;
            else if (r.str(0) == "amg")
                s.preconditioner = Preconditioner::amg;
            else
                r.fail("expected jacobi, ic0 or amg");
        } else if (l.key == "max_iter") {
            r.arity(1, 1);
            const long n = r.integer(0);
            if (n <= 0)
                r.fail("must be positive");
            s.max_iter = static_cast<std::size_t>(n);
        } else if (l.key == "max_adapt_passes") {
            r.arity(1, 1);
            s.max_adapt_passes = static_cast<int>(r.integer(0));
        } else if (l.key == "freeze_phase") {
            r.arity(1, 1);
            s.freeze_phase = r.boolean(0);
        } else if (l.key == "vtk_every") {
            r.arity(1, 1);
            s.vtk_every = static_cast<int>(r.integer(0));
        } else {
            r.fail("unknown key");
        }
    }

    auto cfg_fail = [&](const std::string &m) { throw Error(ErrorCategory::config, source + ": " + m); };
    if (!geometry_kind.empty()) {
        if (geometry_kind == "box") {
            const std::size_t n = static_cast<std::size_t>(box_dim);
            if (lo.empty())
                lo.assign(n, 0.0);
            if (hi.empty())
                cfg_fail("box geometry requires 'hi'");
            if (lo.size() != n || hi.size() != n)
                cfg_fail("box corners must have 'dim' coordinates");
            if (box_dim == 2)
                s.geometry = BoxDomain<2>{{lo[0], lo[1]}, {hi[0], hi[1]}, diagonal, slit};
            else
                s.geometry = BoxDomain<3>{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}, diagonal, slit};
        } else if (geometry_kind == "hole") {
            HoleDomain g;
            if (!lo.empty())
                g.lo = {lo.at(0), lo.at(1)};
            if (!hi.empty())
                g.hi = {hi.at(0), hi.at(1)};
            if (!center.empty())
                g.center = {center.at(0), center.at(1)};
            if (radius != -1.0)
                g.radius = radius;
            if (segments != -1)
                g.segments = segments;
            s.geometry = g;
        } else {
            LShapeDomain g;
            if (size != -1.0)
                g.size = size;
            if (cut != -1.0)
                g.cut = cut;
            s.geometry = g;
        }
    } else if (seen.count("lo") || seen.count("hi") || seen.count("radius") || seen.count("size")) {
        cfg_fail("geometry parameters given without 'geometry'");
    }
    if (E || nu) {
        if (!E || !nu)
            cfg_fail("E and nu must be given together");
        if (lambda || mu)
            cfg_fail("give either E and nu or lambda and mu");
        try {
            const auto lm = lame_from_E_nu(*E, *nu);
            s.material.lambda = lm.lambda;
            s.material.mu = lm.mu;
        } catch (const Error &e) {
            cfg_fail(e.what());
        }
    } else {
        if (lambda)
            s.material.lambda = *lambda;
        if (mu)
            s.material.mu = *mu;
    }
    if (!seen.count("base")) {
        static const std::vector<std::string> required{"geometry", "Gc", "l0"};
        for (const auto &k : required)
            if (!seen.count(k))
                cfg_fail("missing required key '" + k + "'");
        if (!(lambda || E))
            cfg_fail("missing elastic parameters (lambda and mu, or E and nu)");
        if (!replaced_bc)
            cfg_fail("missing 'dirichlet' conditions");
    }
    s.validate();
    return s;
}

/// Builtin name or path to a config file.
inline Scenario load_scenario(const std::string &name_or_path)
{
    if (auto b = builtin_scenario(name_or_path))
        return *b;
    std::ifstream in(name_or_path);
    if (!in)
        throw Error(ErrorCategory::config,
                    "'" + name_or_path + "' is neither a builtin scenario nor a readable config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), name_or_path);
}

template <int Dim>
Mesh<Dim> initial_mesh(const Scenario &s)
{
    if constexpr (Dim == 2) {
        if (const auto *b = std::get_if<BoxDomain<2>>(&s.geometry))
            return s.divisions[0] > 0 ? box_mesh<2>(*b, {s.divisions[0], s.divisions[1]}) : structured_mesh(*b, s.h);
        if (const auto *g = std::get_if<HoleDomain>(&s.geometry))
            return structured_mesh(*g, s.h);
        if (const auto *g = std::get_if<LShapeDomain>(&s.geometry))
            return structured_mesh(*g, s.h);
    } else {
        if (const auto *b = std::get_if<BoxDomain<3>>(&s.geometry))
            return s.divisions[0] > 0 ? box_mesh<3>(*b, s.divisions) : structured_mesh(*b, s.h);
    }
    throw Error(ErrorCategory::invalid_argument, "initial_mesh: dimension does not match the geometry");
}

} // namespace phasefrac
