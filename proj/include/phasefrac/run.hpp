#pragma once

#include "io.hpp"
#include "scenario.hpp"

#include <chrono>
#include <filesystem>

namespace phasefrac {

struct StepRecord
{
    std::size_t step = 0;
    StepReport report;
    double eta_global = 0.0;
};

struct RunRecord
{
    std::string scenario;
    std::vector<StepRecord> steps;
    double wall_seconds = 0.0;
    std::size_t initial_cells = 0;
    std::size_t final_cells = 0;
    std::size_t final_nodes = 0;
    bool completed = false;
    std::string failure; ///< diagnostics when the run stopped early

    std::vector<CsvRow> csv_rows() const
    {
        std::vector<CsvRow> rows;
        for (const auto &s : steps)
            rows.push_back({s.step, s.report.load_value, s.report.reaction, s.report.iterations, s.report.n_cells,
                            s.eta_global});
        return rows;
    }
};

/// Everything an observer may inspect after a load step.
template <int Dim>
struct StepView
{
    std::size_t step;
    const Mesh<Dim> &mesh;
    const SimulationState<Dim> &state;
    const StepRecord &record;
    const TransferMap &transfer; ///< from the previous step's mesh to the current one
    const ErrorIndicators &indicators;
};

template <int Dim>
struct RunOptions
{
    std::string out_dir;            ///< empty: no files
    std::size_t max_steps = 0;      ///< 0: full schedule
    std::function<void(const StepView<Dim> &)> observer;
};

namespace detail {

template <int Dim>
void write_snapshot(const std::string &dir, const std::string &name, std::size_t step, const Mesh<Dim> &mesh,
                    const SimulationState<Dim> &s, const ErrorIndicators &ind)
{
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%05zu.vtk", step);
    write_vtk(mesh, {{"d", 1, s.d}, {"u", Dim, s.u}}, {{"H", 1, s.H}, {"eta", 1, ind.eta}},
              (std::filesystem::path(dir) / (name + suffix)).string());
}

} // namespace detail

/**
 * Runs the load schedule of a scenario of dimension Dim. The run stops at
 * the first load step that fails to converge; the record then holds the
 * completed steps and the diagnostics.
 */
template <int Dim>
RunRecord run(const Scenario &sc, const RunOptions<Dim> &opt = {})
{
    if (sc.dim() != Dim)
        throw Error(ErrorCategory::invalid_argument, "run: scenario dimension mismatch");
    sc.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.scenario = sc.name;
    if (!opt.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(opt.out_dir, ec);
        if (ec)
            throw Error(ErrorCategory::io, "cannot create output directory '" + opt.out_dir + "'");
    }

    Mesh<Dim> mesh = initial_mesh<Dim>(sc);
    auto state = SimulationState<Dim>::zero(mesh);
    DiscretizationCache<Dim> cache(sc.bc);
    rec.initial_cells = mesh.n_cells();

    AdaptivityOptions aopt = sc.adaptivity;
    aopt.h_min = sc.h_min();
    TransferMap step_map;
    StepOptions<Dim> sopt;
    sopt.tol = sc.tol;
    sopt.max_iter = sc.max_iter;
    sopt.cg_tol = sc.cg_tol;
    sopt.preconditioner = sc.preconditioner;
    sopt.freeze_phase = sc.freeze_phase;
    sopt.max_adapt_passes = sc.max_adapt_passes;
    if (sc.adaptive && !sc.freeze_phase)
        sopt.adapt = [&](Mesh<Dim> &m, SimulationState<Dim> &s) {
            const auto geo = cache.get(m).scalar.geometry;
            auto r = estimate_and_adapt(m, s, aopt, *geo);
            if (r.changed)
                step_map = compose(step_map, r.transfer);
            return r.changed;
        };

    auto indicators = [&]() {
        const auto &geo = *cache.get(mesh).scalar.geometry;
        return error_indicators(mesh, state.d, recover_gradient(mesh, state.d, aopt.method, geo), geo);
    };
    if (!opt.out_dir.empty() && sc.vtk_every > 0)
        detail::write_snapshot(opt.out_dir, sc.name, 0, mesh, state, indicators());

    const auto loads = sc.load_values();
    const std::size_t n = opt.max_steps > 0 ? std::min(opt.max_steps, loads.size()) : loads.size();
    for (std::size_t k = 0; k < n; ++k) {
        step_map = TransferMap::identity(mesh.generation(), mesh.n_nodes(), mesh.n_cells());
        StepRecord sr;
        sr.step = k + 1;
        try {
            sr.report = staggered_step(mesh, state, sc.material, cache, loads[k], sopt);
        } catch (const Error &e) {
            rec.failure = "step " + std::to_string(k + 1) + ": " + e.what();
            break;
        }
        const auto ind = indicators();
        sr.eta_global = ind.global;
        rec.steps.push_back(sr);
        if (opt.observer)
            opt.observer(StepView<Dim>{k + 1, mesh, state, rec.steps.back(), step_map, ind});
        if (!opt.out_dir.empty() && sc.vtk_every > 0 &&
            ((k + 1) % static_cast<std::size_t>(sc.vtk_every) == 0 || k + 1 == n))
            detail::write_snapshot(opt.out_dir, sc.name, k + 1, mesh, state, ind);
        if (!sr.report.converged) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "step %zu: staggered iteration did not converge after %zu iterations "
                          "(relative residuals %.3e, %.3e)",
                          k + 1, sr.report.iterations, sr.report.r0, sr.report.r1);
            rec.failure = buf;
            break;
        }
    }
    rec.completed = rec.failure.empty();
    rec.final_cells = mesh.n_cells();
    rec.final_nodes = mesh.n_nodes();
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!opt.out_dir.empty())
        write_csv(rec.csv_rows(), (std::filesystem::path(opt.out_dir) / (sc.name + ".csv")).string());
    return rec;
}

} // namespace phasefrac
