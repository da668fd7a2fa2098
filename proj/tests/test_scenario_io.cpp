#include "phasefrac/run.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace phasefrac;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string &name)
{
    auto p = fs::temp_directory_path() / ("phasefrac_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Minimal legacy VTK reader: points, connectivity and named scalar/vector sections.
struct VtkData
{
    std::vector<std::array<double, 3>> points;
    std::vector<std::vector<int>> cells;
    std::vector<int> types;
    std::map<std::string, std::vector<double>> point_data, cell_data;
};

VtkData read_vtk(const fs::path &p)
{
    std::ifstream in(p);
    VtkData v;
    std::string tok;
    std::map<std::string, std::vector<double>> *target = nullptr;
    std::size_t count = 0;
    while (in >> tok) {
        if (tok == "POINTS") {
            std::string ty;
            in >> count >> ty;
            v.points.resize(count);
            for (auto &x : v.points)
                in >> x[0] >> x[1] >> x[2];
        } else if (tok == "CELLS") {
            std::size_t total;
            in >> count >> total;
            v.cells.resize(count);
            for (auto &c : v.cells) {
                int k;
                in >> k;
                c.resize(k);
                for (int &i : c)
                    in >> i;
            }
        } else if (tok == "CELL_TYPES") {
            in >> count;
            v.types.resize(count);
            for (int &t : v.types)
                in >> t;
        } else if (tok == "POINT_DATA") {
            in >> count;
            target = &v.point_data;
        } else if (tok == "CELL_DATA") {
            in >> count;
            target = &v.cell_data;
        } else if (tok == "SCALARS") {
            std::string name, ty, lt, def;
            int nc;
            in >> name >> ty >> nc >> lt >> def;
            auto &f = (*target)[name];
            f.resize(count);
            for (double &x : f)
                in >> x;
        } else if (tok == "VECTORS") {
            std::string name, ty;
            in >> name >> ty;
            auto &f = (*target)[name];
            f.resize(3 * count);
            for (double &x : f)
                in >> x;
        }
    }
    return v;
}

} // namespace

TEST_CASE("builtin presets carry the benchmark parameters", "[scenario]")
{
    const auto cn = circular_notch_scenario();
    CHECK(cn.material.Gc == 1.0);
    CHECK(cn.material.l0 == 0.02);
    CHECK_THAT(cn.material.lambda, WithinRel(200.0 * 0.2 / (1.2 * 0.6), 1e-14));
    CHECK_THAT(cn.material.mu, WithinRel(200.0 / 2.4, 1e-14));
    CHECK(cn.bc.phase_zero_on_boundary);
    CHECK(cn.n_steps() == 30);
    CHECK_THAT(cn.total_displacement(), WithinAbs(5 * 1.4e-2 + 25 * 2.2e-3, 1e-15));
    const auto &hole = std::get<HoleDomain>(cn.geometry);
    CHECK(hole.center == Point<2>{0.5, 0.5});
    CHECK(hole.radius == 0.2);

    for (const auto &s : {notch_tension_scenario(), notch_shear_scenario()}) {
        CHECK(s.material.Gc == 2.7e-3);
        CHECK(s.material.l0 == 1.33e-2);
        CHECK(s.material.lambda == 121.15);
        CHECK(s.material.mu == 80.77);
        const auto &box = std::get<BoxDomain<2>>(s.geometry);
        REQUIRE(box.slit);
        CHECK(box.slit->level == 0.5);
        CHECK(box.slit->tip == 0.5);
    }
    const auto nt = notch_tension_scenario();
    CHECK(nt.n_steps() == 1600);
    CHECK_THAT(nt.total_displacement(), WithinRel(6.1e-3, 1e-12));
    const auto ns = notch_shear_scenario();
    CHECK(ns.n_steps() == 1700);
    CHECK_THAT(ns.total_displacement(), WithinRel(1.7e-2, 1e-12));
    CHECK(ns.bc.load_component() == 0);

    const auto ls = lshape_scenario();
    CHECK(ls.material.Gc == 8.9e-5);
    CHECK(ls.material.l0 == 1.88);
    CHECK(ls.material.lambda == 6.16);
    CHECK(ls.material.mu == 10.95);

    const auto s3 = slit3d_scenario();
    CHECK(s3.dim() == 3);
    CHECK(s3.material.Gc == 5e-4);
    CHECK(s3.material.l0 == 0.2);
    CHECK_THAT(s3.material.lambda, WithinRel(12.0, 1e-14));
    CHECK_THAT(s3.material.mu, WithinRel(8.0, 1e-14));
    CHECK(s3.n_steps() == 450);
    CHECK_THAT(s3.total_displacement(), WithinRel(4.5e-2, 1e-12));
    CHECK(s3.bc.load_component() == 2);
    CHECK(slit3d_coarse_scenario().n_steps() == 50);

    for (const auto &name : builtin_scenarios()) {
        const auto s = builtin_scenario(name);
        REQUIRE(s);
        CHECK(s->name == name);
        CHECK_NOTHROW(s->validate());
        CHECK((s->h_min() == s->material.l0 / 4.0 || name == "slit3d-coarse"));
    }
    CHECK_FALSE(builtin_scenario("nope"));
}

TEST_CASE("load values are cumulative sums of the schedule", "[scenario][property]")
{
    for (const auto &name : builtin_scenarios()) {
        const auto s = *builtin_scenario(name);
        const auto v = s.load_values();
        REQUIRE(v.size() == s.n_steps());
        std::vector<double> inc;
        for (const auto &seg : s.schedule)
            for (int k = 0; k < seg.steps; ++k)
                inc.push_back(seg.increment);
        std::vector<double> sums(inc.size());
        std::partial_sum(inc.begin(), inc.end(), sums.begin());
        CHECK(v == sums);
    }
    // the L-shape schedule goes up, down past zero and up again
    const auto v = lshape_scenario().load_values();
    CHECK(*std::min_element(v.begin(), v.end()) < 0.0);
    CHECK(v.back() > 0.0);
}

TEST_CASE("config files override a builtin base", "[scenario][config]")
{
    const auto s = parse_scenario("# tweaked\nbase = notch-shear\nname = short\nsegment = 3 2e-5\n"
                                  "theta = 0.3\nmarking = l2\nrecovery = harmonic\nmax_iter = 80\n"
                                  "preconditioner = ic0\nvtk_every = 2\n");
    CHECK(s.name == "short");
    CHECK(s.n_steps() == 3);
    CHECK_THAT(s.total_displacement(), WithinRel(6e-5, 1e-14));
    CHECK(s.adaptivity.theta == 0.3);
    CHECK(s.adaptivity.marking == Marking::l2);
    CHECK(s.adaptivity.method == RecoveryMethod::harmonic);
    CHECK(s.max_iter == 80);
    CHECK(s.preconditioner == Preconditioner::ic0);
    CHECK(s.vtk_every == 2);
    CHECK(s.material.Gc == 2.7e-3); // inherited

    const auto custom = parse_scenario("geometry = box\ndim = 3\nhi = 1 2 3\nh = 0.5\nGc = 1\nl0 = 0.1\n"
                                       "E = 10\nnu = 0.25\ndirichlet = bottom z fixed\ndirichlet = top z load\n"
                                       "segment = 4 0.01\n");
    CHECK(custom.dim() == 3);
    CHECK(custom.bc.displacement.size() == 2);
    CHECK(custom.bc.load_component() == 2);
    const auto l = lame_from_E_nu(10.0, 0.25);
    CHECK(custom.material.lambda == l.lambda);
    CHECK(custom.material.mu == l.mu);
}

TEST_CASE("config errors name the source and line", "[scenario][config]")
{
    auto message = [](const std::string &text) {
        try {
            parse_scenario(text, "t.cfg");
        } catch (const Error &e) {
            CHECK(e.category() == ErrorCategory::config);
            return std::string(e.what());
        }
        FAIL("no error for: " << text);
        return std::string();
    };
    CHECK_THAT(message("base = lshape\nfoo = 1\n"), ContainsSubstring("t.cfg:2: foo:") && ContainsSubstring("unknown key"));
    CHECK_THAT(message("base = lshape\ntheta = 0.5\ntheta = 0.4\n"), ContainsSubstring("t.cfg:3: theta:") &&
                                                                       ContainsSubstring("duplicate"));
    CHECK_THAT(message("theta = 0.5\nbase = lshape\n"), ContainsSubstring("t.cfg:2: base:"));
    CHECK_THAT(message("base = nothing\n"), ContainsSubstring("unknown builtin"));
    CHECK_THAT(message("base = lshape\ntheta = abc\n"), ContainsSubstring("invalid number"));
    CHECK_THAT(message("base = lshape\ntheta = 1.5\n"), ContainsSubstring("theta"));
    CHECK_THAT(message("base = lshape\n\n\nsegment = 1\n"), ContainsSubstring("t.cfg:4: segment:"));
    CHECK_THAT(message("base = lshape\nno equals sign\n"), ContainsSubstring("t.cfg:2"));
    CHECK_THAT(message("base = lshape\ndirichlet = load w fixed\n"), ContainsSubstring("invalid component"));
    CHECK_THAT(message("base = lshape\npreconditioner = lu\n"), ContainsSubstring("jacobi, ic0 or amg"));
    CHECK_THAT(message("geometry = box\nhi = 1 1\nGc = 1\nl0 = 0.1\nE = 1\n"), ContainsSubstring("nu"));
    CHECK_THAT(message("geometry = box\nhi = 1 1\nGc = 1\nl0 = 0.1\nlambda = 1\nmu = 1\n"),
               ContainsSubstring("dirichlet"));
    CHECK_THAT(message("base = lshape\ndirichlet = nowhere x fixed\n"), ContainsSubstring("unknown boundary group"));

    CHECK_THROWS_AS(load_scenario("/definitely/not/here.cfg"), Error);
    const auto dir = scratch("cfg");
    std::ofstream(dir / "a.cfg") << "base = slit3d-coarse\nsegment = 2 1e-4\n";
    const auto s = load_scenario((dir / "a.cfg").string());
    CHECK(s.n_steps() == 2);
    CHECK(s.dim() == 3);
}

TEST_CASE("VTK output round-trips through a reader", "[io]")
{
    const auto m = box_mesh<2>({{0.0, 0.0}, {2.0, 1.0}}, {3, 2});
    std::vector<double> d(m.n_nodes()), u(2 * m.n_nodes()), h(m.n_cells());
    for (std::size_t v = 0; v < m.n_nodes(); ++v) {
        d[v] = 0.1 * static_cast<double>(v) + 1.0 / 3.0;
        u[2 * v] = -static_cast<double>(v);
        u[2 * v + 1] = 1e-7 * static_cast<double>(v);
    }
    for (std::size_t c = 0; c < m.n_cells(); ++c)
        h[c] = std::exp(static_cast<double>(c));
    const auto dir = scratch("vtk");
    const auto path = (dir / "m.vtk").string();
    write_vtk(m, {{"d", 1, d}, {"u", 2, u}}, {{"H", 1, h}}, path);
    const auto v = read_vtk(path);
    REQUIRE(v.points.size() == m.n_nodes());
    REQUIRE(v.cells.size() == m.n_cells());
    for (std::size_t i = 0; i < m.n_nodes(); ++i) {
        CHECK_THAT(v.points[i][0], WithinAbs(m.node(static_cast<index_t>(i))[0], 1e-8));
        CHECK_THAT(v.points[i][1], WithinAbs(m.node(static_cast<index_t>(i))[1], 1e-8));
        CHECK(v.points[i][2] == 0.0);
        CHECK_THAT(v.point_data.at("d")[i], WithinRel(d[i], 1e-8));
        CHECK_THAT(v.point_data.at("u")[3 * i], WithinAbs(u[2 * i], 1e-8 * std::abs(u[2 * i])));
        CHECK_THAT(v.point_data.at("u")[3 * i + 1], WithinRel(u[2 * i + 1], 1e-8));
        CHECK(v.point_data.at("u")[3 * i + 2] == 0.0);
    }
    for (std::size_t c = 0; c < m.n_cells(); ++c) {
        CHECK(v.types[c] == 5);
        const auto &cl = m.cell(static_cast<index_t>(c));
        CHECK(v.cells[c] == std::vector<int>(cl.begin(), cl.end()));
        CHECK_THAT(v.cell_data.at("H")[c], WithinRel(h[c], 1e-8));
    }

    const auto m3 = box_mesh<3>({{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}, {1, 1, 1});
    write_vtk(m3, {}, {}, (dir / "t.vtk").string());
    const auto v3 = read_vtk(dir / "t.vtk");
    CHECK(v3.types == std::vector<int>(m3.n_cells(), 10));

    CHECK_THROWS_AS(write_vtk(m, {{"d", 1, std::vector<double>(3)}}, {}, path), Error);
    try {
        write_vtk(m, {}, {}, "/nonexistent_dir/x.vtk");
        FAIL("expected an io error");
    } catch (const Error &e) {
        CHECK(e.category() == ErrorCategory::io);
    }
}

TEST_CASE("CSV has a header and one row per step", "[io]")
{
    const auto dir = scratch("csv");
    write_csv({{1, 1e-4, 2.5, 3, 100, 0.125}}, (dir / "r.csv").string());
    CHECK(slurp(dir / "r.csv") == "step,load_mm,reaction_kN,iterations,n_cells,eta_global\n"
                                  "1,1.00000000e-04,2.50000000e+00,3,100,1.25000000e-01\n");
    try {
        write_csv({}, "/nonexistent_dir/r.csv");
        FAIL("expected an io error");
    } catch (const Error &e) {
        CHECK(e.category() == ErrorCategory::io);
    }
}

TEST_CASE("a short run writes its CSV and snapshots", "[run]")
{
    auto s = parse_scenario("base = notch-tension\nh = 0.125\nsegment = 2 1e-4\nvtk_every = 1\n");
    const auto dir = scratch("run");
    std::size_t seen = 0;
    RunOptions<2> opt;
    opt.out_dir = dir.string();
    opt.observer = [&](const StepView<2> &v) {
        ++seen;
        CHECK(v.mesh.n_cells() == v.record.report.n_cells);
        CHECK(v.indicators.eta.size() == v.mesh.n_cells());
    };
    const auto rec = run<2>(s, opt);
    CHECK(rec.completed);
    CHECK(seen == 2);
    REQUIRE(rec.steps.size() == 2);
    CHECK(rec.steps[1].report.reaction > rec.steps[0].report.reaction);
    const auto csv = slurp(dir / "notch-tension.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    for (int k = 0; k <= 2; ++k) {
        char name[64];
        std::snprintf(name, sizeof name, "notch-tension_%05d.vtk", k);
        CHECK(fs::exists(dir / name));
    }
    const auto v = read_vtk(dir / "notch-tension_00002.vtk");
    CHECK(v.cells.size() == rec.final_cells);
    CHECK(v.point_data.count("d"));
    CHECK(v.cell_data.count("eta"));

    CHECK_THROWS_AS(run<3>(s), Error);
}
