// Acceptance driver: `acceptance [N...]` checks the numbered criteria (all when
// no argument is given) and prints one PASS/FAIL line per criterion.

#include "phasefrac/run.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

using namespace phasefrac;

namespace {

namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome
{
    bool pass = true;
    std::ostringstream detail;
    std::string failed;

    void require(bool ok, const std::string &what)
    {
        if (!ok) {
            pass = false;
            failed += " [failed: " + what + "]";
        }
    }
};

template <int Dim>
double cell_mean(const Mesh<Dim> &m, const std::vector<double> &d, index_t c)
{
    double s = 0.0;
    for (index_t v : m.cell(c))
        s += d[v];
    return s / (Dim + 1);
}

std::vector<double> reactions(const RunRecord &r)
{
    std::vector<double> v;
    for (const auto &s : r.steps)
        v.push_back(s.report.reaction);
    return v;
}

Scenario preset(const std::string &name)
{
    return *builtin_scenario(name);
}

// 1: the unit and property binaries, timed together.
Outcome property_suite()
{
    Outcome o;
    std::vector<std::string> bins;
    std::stringstream list(PHASEFRAC_UNIT_TESTS);
    for (std::string b; std::getline(list, b, '|');)
        bins.push_back(b);
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto &b : bins) {
        const std::string cmd = "\"" + b + "\" > /dev/null 2>&1";
        o.require(std::system(cmd.c_str()) == 0, fs::path(b).filename().string());
    }
    const double t = seconds_since(t0);
    o.require(t < 60.0, "runtime");
    o.detail << bins.size() << " binaries in " << t << " s";
    return o;
}

// Independent P1 plane-strain assembly with a sparse direct solve; returns
// the reaction on the loaded nodes for a unit load.
double elastic_reaction_per_unit_load(const Mesh<2> &m, const Scenario &sc)
{
    const double lam = sc.material.lambda, mu = sc.material.mu;
    Eigen::Matrix3d D;
    D << lam + 2 * mu, lam, 0, lam, lam + 2 * mu, 0, 0, 0, mu;
    const Eigen::Index n = static_cast<Eigen::Index>(2 * m.n_nodes());
    std::vector<Eigen::Triplet<double>> t;
    for (const auto &cl : m.cells()) {
        Eigen::Matrix3d X;
        for (int a = 0; a < 3; ++a)
            X.row(a) << 1.0, m.node(cl[a])[0], m.node(cl[a])[1];
        const double area = 0.5 * std::abs(X.determinant());
        const Eigen::Matrix3d G = X.inverse(); // column a: coefficients of barycentric a
        Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
        for (int a = 0; a < 3; ++a) {
            B(0, 2 * a) = G(1, a);
            B(1, 2 * a + 1) = G(2, a);
            B(2, 2 * a) = G(2, a);
            B(2, 2 * a + 1) = G(1, a);
        }
        const Eigen::Matrix<double, 6, 6> Ke = area * B.transpose() * D * B;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                t.emplace_back(2 * cl[i / 2] + i % 2, 2 * cl[j / 2] + j % 2, Ke(i, j));
    }
    Eigen::SparseMatrix<double> K(n, n);
    K.setFromTriplets(t.begin(), t.end());

    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    std::vector<char> fixed(static_cast<std::size_t>(n), 0);
    std::vector<index_t> loaded;
    for (const auto &bc : sc.bc.displacement)
        for (index_t v : m.nodes_in_group(bc.group)) {
            fixed[2 * v + bc.component] = 1;
            if (bc.loaded) {
                g(2 * v + bc.component) = 1.0;
                loaded.push_back(v);
            }
        }
    std::vector<Eigen::Index> map(static_cast<std::size_t>(n), -1);
    Eigen::Index nf = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[i])
            map[i] = nf++;
    std::vector<Eigen::Triplet<double>> tf;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
    const Eigen::VectorXd kg = K * g;
    for (Eigen::Index i = 0; i < n; ++i)
        if (map[i] >= 0)
            rhs(map[i]) = -kg(i);
    for (int k = 0; k < K.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it)
            if (map[it.row()] >= 0 && map[it.col()] >= 0)
                tf.emplace_back(map[it.row()], map[it.col()], it.value());
    Eigen::SparseMatrix<double> Kff(nf, nf);
    Kff.setFromTriplets(tf.begin(), tf.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Kff);
    const Eigen::VectorXd xf = ldlt.solve(rhs);
    Eigen::VectorXd u = g;
    for (Eigen::Index i = 0; i < n; ++i)
        if (map[i] >= 0)
            u(i) = xf(map[i]);
    const Eigen::VectorXd f = K * u;
    const int axis = sc.bc.load_component();
    std::sort(loaded.begin(), loaded.end());
    loaded.erase(std::unique(loaded.begin(), loaded.end()), loaded.end());
    double r = 0.0;
    for (index_t v : loaded)
        r += f(2 * v + axis);
    return r;
}

// 2: frozen damage on the circular-notch plate against a direct elastic solve.
Outcome elastic_oracle()
{
    Outcome o;
    auto sc = preset("circular-notch");
    sc.freeze_phase = true;
    sc.adaptive = false;
    const auto rec = run<2>(sc);
    o.require(rec.completed, "run completed");
    const double k = elastic_reaction_per_unit_load(initial_mesh<2>(sc), sc);
    double worst = 0.0;
    for (const auto &s : rec.steps)
        worst = std::max(worst, std::abs(s.report.reaction - k * s.report.load_value) / std::abs(k * s.report.load_value));
    o.require(rec.steps.size() == sc.n_steps(), "all steps");
    o.require(worst < 1e-6, "reaction within 1e-6");
    o.require(rec.wall_seconds < 30.0, "runtime");
    o.detail << rec.steps.size() << " steps, max relative reaction error " << worst << ", " << rec.wall_seconds
             << " s";
    return o;
}

struct Final2d
{
    std::vector<Point<2>> centroids;
    std::vector<double> cell_d;
    std::vector<std::vector<Point<2>>> damaged; // per cell, the part where the P1 field d >= 0.5
};

// Part of a triangle where the linear interpolant of d is at least 0.5.
std::vector<Point<2>> superlevel_polygon(const std::array<Point<2>, 3> &x, const std::array<double, 3> &d)
{
    std::vector<Point<2>> poly;
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        if (d[i] >= 0.5)
            poly.push_back(x[i]);
        if ((d[i] >= 0.5) != (d[j] >= 0.5)) {
            const double t = (0.5 - d[i]) / (d[j] - d[i]);
            poly.push_back({x[i][0] + t * (x[j][0] - x[i][0]), x[i][1] + t * (x[j][1] - x[i][1])});
        }
    }
    return poly;
}

double distance_to_polygon(const Point<2> &p, const std::vector<Point<2>> &poly)
{
    // convex polygon with consistent orientation: inside when all edge cross products share a sign
    bool pos = true, neg = true;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto &a = poly[i];
        const auto &b = poly[(i + 1) % poly.size()];
        const double ex = b[0] - a[0], ey = b[1] - a[1];
        const double cr = ex * (p[1] - a[1]) - ey * (p[0] - a[0]);
        pos = pos && cr >= 0.0;
        neg = neg && cr <= 0.0;
        const double len2 = ex * ex + ey * ey;
        const double t = len2 > 0.0 ? std::clamp(((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, std::hypot(p[0] - a[0] - t * ex, p[1] - a[1] - t * ey));
    }
    return poly.size() >= 3 && (pos || neg) ? 0.0 : best;
}

RunRecord circular_notch(Final2d *fin)
{
    const auto sc = preset("circular-notch");
    RunOptions<2> opt;
    if (fin)
        opt.observer = [&](const StepView<2> &v) {
            if (v.step != sc.n_steps())
                return;
            fin->centroids.clear();
            fin->damaged.clear();
            for (std::size_t c = 0; c < v.mesh.n_cells(); ++c)
                fin->centroids.push_back(v.mesh.centroid(static_cast<index_t>(c)));
            for (const auto &cell : v.mesh.cells()) {
                std::array<Point<2>, 3> x;
                std::array<double, 3> d;
                for (int k = 0; k < 3; ++k) {
                    x[k] = v.mesh.node(cell[k]);
                    d[k] = v.state.d[cell[k]];
                }
                if (auto poly = superlevel_polygon(x, d); !poly.empty())
                    fin->damaged.push_back(std::move(poly));
            }
        };
    return run<2>(sc, opt);
}

// 3: circular-notch benchmark.
Outcome circular_notch_benchmark()
{
    Outcome o;
    Final2d fin;
    const auto rec = circular_notch(&fin);
    const auto r = reactions(rec);
    o.require(rec.completed && r.size() == 30, "full schedule (" + rec.failure + ")");
    if (r.empty())
        return o;
    const auto peak_it = std::max_element(r.begin(), r.end());
    const std::size_t peak = static_cast<std::size_t>(peak_it - r.begin());
    // early loading: the first segment of coarse increments
    const std::size_t early = std::min<std::size_t>(5, peak + 1);
    bool rising = early >= 2;
    for (std::size_t k = 1; k < early; ++k)
        rising = rising && r[k] > r[k - 1];
    o.require(rising, "monotone rise over the first steps");
    o.require(peak + 1 < r.size(), "interior peak");
    const double ratio = r.back() / *peak_it;
    o.require(ratio < 0.05, "final reaction below 5% of peak");
    o.require(rec.final_cells >= 3186 && rec.final_cells <= 28674, "cell count within factor 3 of 9558");

    const double reach = 4.0 * preset("circular-notch").material.l0;
    std::size_t near = 0;
    for (const auto &c : fin.centroids)
        for (const auto &poly : fin.damaged)
            if (distance_to_polygon(c, poly) <= reach) {
                ++near;
                break;
            }
    const double frac = fin.centroids.empty() ? 0.0 : static_cast<double>(near) / fin.centroids.size();
    o.require(frac >= 0.70, "70% of cells near the crack band");
    o.require(rec.wall_seconds < 900.0, "runtime");
    o.detail << "peak " << *peak_it << " at step " << peak + 1 << ", final/peak " << ratio << ", cells "
             << rec.initial_cells << " -> " << rec.final_cells << ", near band " << frac << ", " << rec.wall_seconds
             << " s";
    return o;
}

// 4: notch tension.
Outcome notch_tension()
{
    Outcome o;
    const auto sc = preset("notch-tension");
    std::size_t max_cells = 0;
    bool reached = false;
    RunOptions<2> opt;
    opt.observer = [&](const StepView<2> &v) {
        max_cells = std::max(max_cells, v.mesh.n_cells());
        if (v.step != sc.n_steps())
            return;
        for (std::size_t i = 0; i < v.mesh.n_nodes(); ++i)
            if (v.state.d[i] > 0.9 && v.mesh.node(static_cast<index_t>(i))[0] >= 1.0 - 1e-12)
                reached = true;
    };
    const auto rec = run<2>(sc, opt);
    const auto r = reactions(rec);
    o.require(rec.completed && r.size() == sc.n_steps(), "full schedule (" + rec.failure + ")");
    if (r.empty())
        return o;
    const std::size_t peak = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    const double peak_load = rec.steps[peak].report.load_value;
    o.require(reached, "d > 0.9 reaches the right edge");
    o.require(peak_load >= 5.0e-3 && peak_load <= 6.1e-3, "peak load in [5.0e-3, 6.1e-3]");
    o.require(max_cells < 11250, "cells below 11250");
    o.detail << "peak " << r[peak] << " at u = " << peak_load << ", max cells " << max_cells << ", "
             << rec.wall_seconds << " s";
    return o;
}

// 5: notch shear.
Outcome notch_shear()
{
    Outcome o;
    const auto sc = preset("notch-shear");
    const double limit = 2.0 * sc.h_min();
    std::vector<double> prev_diam;
    std::vector<char> prev_damaged;
    std::size_t newly = 0, violations = 0;
    std::vector<std::pair<double, double>> path; // centroids with d > 0.9 beyond the tip
    {
        const auto m0 = initial_mesh<2>(sc);
        for (std::size_t c = 0; c < m0.n_cells(); ++c)
            prev_diam.push_back(m0.diameter(static_cast<index_t>(c)));
        prev_damaged.assign(m0.n_cells(), 0);
    }
    RunOptions<2> opt;
    opt.observer = [&](const StepView<2> &v) {
        const auto &m = v.mesh;
        std::vector<double> diam(m.n_cells());
        std::vector<char> damaged(m.n_cells());
        for (std::size_t c = 0; c < m.n_cells(); ++c) {
            const auto ci = static_cast<index_t>(c);
            diam[c] = m.diameter(ci);
            damaged[c] = cell_mean(m, v.state.d, ci) > 0.5;
            const index_t parent = v.transfer.parent_of_cell[c];
            if (damaged[c] && !prev_damaged[parent]) {
                ++newly;
                violations += !(prev_diam[parent] < limit);
            }
        }
        prev_diam = std::move(diam);
        prev_damaged = std::move(damaged);
        if (v.step == sc.n_steps())
            for (std::size_t c = 0; c < m.n_cells(); ++c) {
                const auto x = m.centroid(static_cast<index_t>(c));
                if (x[0] > 0.5 && cell_mean(m, v.state.d, static_cast<index_t>(c)) > 0.9)
                    path.emplace_back(x[0], x[1]);
            }
    };
    const auto rec = run<2>(sc, opt);
    o.require(rec.completed && rec.steps.size() == sc.n_steps(), "full schedule (" + rec.failure + ")");

    // mean height of the band in slabs of width 0.05 beyond the tip
    std::map<int, std::pair<double, int>> slabs;
    for (const auto &[x, y] : path) {
        auto &s = slabs[static_cast<int>((x - 0.5) / 0.05)];
        s.first += y;
        ++s.second;
    }
    std::vector<double> heights;
    for (const auto &[k, s] : slabs)
        heights.push_back(s.first / s.second);
    bool down = heights.size() >= 3;
    for (std::size_t i = 1; i < heights.size(); ++i)
        down = down && heights[i] <= heights[i - 1];
    o.require(down, "band height decreases beyond the tip");
    o.require(newly > 0 && violations == 0, "refinement precedes damage");
    o.detail << heights.size() << " slabs, heights " << (heights.empty() ? 0.0 : heights.front()) << " -> "
             << (heights.empty() ? 0.0 : heights.back()) << ", " << newly << " newly damaged cells, " << violations
             << " unrefined, " << rec.wall_seconds << " s";
    return o;
}

// 6: L-shape under the up-down-up schedule.
Outcome lshape()
{
    Outcome o;
    const auto sc = preset("lshape");
    std::vector<double> dmax;
    RunOptions<2> opt;
    opt.observer = [&](const StepView<2> &v) {
        dmax.push_back(*std::max_element(v.state.d.begin(), v.state.d.end()));
    };
    const auto rec = run<2>(sc, opt);
    const auto r = reactions(rec);
    o.require(rec.completed && r.size() == sc.n_steps(), "full schedule (" + rec.failure + ")");
    std::size_t drops = 0;
    double worst = 0.0, floor_at_drop = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < dmax.size(); ++k)
        if (dmax[k] < dmax[k - 1]) {
            ++drops;
            worst = std::max(worst, dmax[k - 1] - dmax[k]);
            floor_at_drop = std::min(floor_at_drop, dmax[k]);
        }
    o.require(drops == 0, "max d non-decreasing");
    const bool pos = std::any_of(r.begin(), r.end(), [](double x) { return x > 0.0; });
    const bool neg = std::any_of(r.begin(), r.end(), [](double x) { return x < 0.0; });
    o.require(pos && neg, "reaction changes sign");
    o.detail << "max d " << (dmax.empty() ? 0.0 : dmax.back()) << ", " << drops << " drops";
    if (drops)
        o.detail << " (largest " << worst << ", all with max d >= " << floor_at_drop << ")";
    o.detail << ", reaction range ["
             << (r.empty() ? 0.0 : *std::min_element(r.begin(), r.end())) << ", "
             << (r.empty() ? 0.0 : *std::max_element(r.begin(), r.end())) << "], " << rec.wall_seconds << " s";
    return o;
}

// 7: coarse 3D slit block.
Outcome slit3d()
{
    Outcome o;
    const auto sc = preset("slit3d-coarse");
    const auto *box = std::get_if<BoxDomain<3>>(&sc.geometry);
    const double plane = box->slit->level;
    const double band = 10.0 * sc.material.l0;
    const double fine = 2.0 * sc.h_min();
    std::vector<double> prev_h(initial_mesh<3>(sc).n_cells(), 0.0);
    bool conforming = true, monotone = true;
    std::size_t finest = 0, outside = 0;
    RunOptions<3> opt;
    opt.observer = [&](const StepView<3> &v) {
        conforming = conforming && is_conforming(v.mesh);
        for (std::size_t c = 0; c < v.mesh.n_cells(); ++c)
            monotone = monotone && v.state.H[c] >= prev_h[v.transfer.parent_of_cell[c]];
        prev_h = v.state.H;
        if (v.step == sc.n_steps()) {
            // cells refined close to the size floor
            for (std::size_t c = 0; c < v.mesh.n_cells(); ++c)
                if (v.mesh.diameter(static_cast<index_t>(c)) < fine) {
                    ++finest;
                    outside += std::abs(v.mesh.centroid(static_cast<index_t>(c))[2] - plane) > band;
                }
        }
    };
    const auto rec = run<3>(sc, opt);
    const auto r = reactions(rec);
    o.require(rec.completed && r.size() == sc.n_steps(), "full schedule (" + rec.failure + ")");
    o.require(conforming, "conforming refinement");
    o.require(monotone, "H monotone");
    bool increasing = !r.empty() && std::isfinite(r[0]) && r[0] > 0.0;
    for (std::size_t k = 1; k < r.size(); ++k)
        increasing = increasing && std::isfinite(r[k]) && r[k] > r[k - 1];
    o.require(increasing, "reaction finite and increasing");
    o.require(finest > 0 && 10 * outside <= finest, "90% of the finest cells near the slit plane");
    o.detail << "cells " << rec.initial_cells << " -> " << rec.final_cells << ", " << finest << " finest, "
             << outside << " away from the plane, final reaction " << (r.empty() ? 0.0 : r.back()) << ", "
             << rec.wall_seconds << " s";
    return o;
}

// 8: two circular-notch runs give byte-identical CSV.
Outcome determinism()
{
    Outcome o;
    const auto sc = preset("circular-notch");
    const auto base = fs::temp_directory_path() / "phasefrac_determinism";
    std::string bytes[2];
    for (int k = 0; k < 2; ++k) {
        const auto dir = base / std::to_string(k);
        fs::remove_all(dir);
        RunOptions<2> opt;
        opt.out_dir = dir.string();
        const auto rec = run<2>(sc, opt);
        o.require(rec.completed, "run " + std::to_string(k + 1) + " completed");
        std::ifstream in(dir / (sc.name + ".csv"), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        bytes[k] = ss.str();
    }
    o.require(!bytes[0].empty() && bytes[0] == bytes[1], "identical CSV");
    o.detail << bytes[0].size() << " bytes per CSV";
    return o;
}

} // namespace

int main(int argc, char **argv)
{
    const std::map<int, std::pair<const char *, Outcome (*)()>> criteria{
        {1, {"property suite", property_suite}},   {2, {"elastic oracle", elastic_oracle}},
        {3, {"circular notch", circular_notch_benchmark}}, {4, {"notch tension", notch_tension}},
        {5, {"notch shear", notch_shear}},         {6, {"L-shape", lshape}},
        {7, {"3D slit, coarse", slit3d}},         {8, {"determinism", determinism}}};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (!criteria.count(n)) {
            std::fprintf(stderr, "usage: %s [1-8 ...]\n", argv[0]);
            return 2;
        }
        which.push_back(n);
    }
    if (which.empty())
        for (const auto &[n, c] : criteria)
            which.push_back(n);

    bool all = true;
    for (int n : which) {
        const auto &[name, fn] = criteria.at(n);
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception &e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        all = all && o.pass;
        std::printf("criterion %d (%s): %s  %s%s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.str().c_str(),
                    o.failed.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
