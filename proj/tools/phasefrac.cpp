// Command-line driver: runs a builtin scenario or a config file and writes
// VTK snapshots plus the load-reaction CSV.

#include "phasefrac/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace phasefrac;

int exit_code(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::invalid_argument: return 2;
    case ErrorCategory::config: return 3;
    case ErrorCategory::mesh: return 4;
    case ErrorCategory::solver: return 5;
    case ErrorCategory::io: return 6;
    }
    return 1;
}

struct RunArgs
{
    std::string scenario;
    std::string out = "out";
    std::optional<double> theta, hmin;
    std::optional<std::string> marking, recovery;
    std::optional<int> vtk_every;
    std::size_t max_steps = 0;
    bool quiet = false;
};

template <int Dim>
int execute(const Scenario &sc, const RunArgs &a)
{
    RunOptions<Dim> opt;
    opt.out_dir = a.out;
    opt.max_steps = a.max_steps;
    if (!a.quiet)
        opt.observer = [](const StepView<Dim> &v) {
            const auto &r = v.record.report;
            std::printf("step %5zu  load %.6e  reaction %.6e  iterations %4zu  cells %7zu  eta %.3e\n", v.step,
                        r.load_value, r.reaction, r.iterations, r.n_cells, v.record.eta_global);
            std::fflush(stdout);
        };
    const auto rec = run<Dim>(sc, opt);
    std::printf("%s: %zu steps, cells %zu -> %zu, %.1f s\n", sc.name.c_str(), rec.steps.size(), rec.initial_cells,
                rec.final_cells, rec.wall_seconds);
    if (!rec.completed) {
        std::fprintf(stderr, "error [solver]: %s\n", rec.failure.c_str());
        return exit_code(ErrorCategory::solver);
    }
    return 0;
}

int run_command(const RunArgs &a)
{
    Scenario sc = load_scenario(a.scenario);
    if (a.theta)
        sc.adaptivity.theta = *a.theta;
    if (a.hmin)
        sc.adaptivity.h_min = *a.hmin;
    if (a.marking)
        sc.adaptivity.marking = parse_marking(*a.marking);
    if (a.recovery)
        sc.adaptivity.method = parse_recovery(*a.recovery);
    if (a.vtk_every)
        sc.vtk_every = *a.vtk_every;
    sc.validate();
    return sc.dim() == 2 ? execute<2>(sc, a) : execute<3>(sc, a);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Adaptive phase-field fracture simulations"};
    app.require_subcommand(1);

    RunArgs args;
    auto *run = app.add_subcommand("run", "Run a builtin scenario or a config file");
    run->add_option("scenario", args.scenario, "Builtin scenario name or config path")->required();
    run->add_option("--out", args.out, "Output directory")->capture_default_str();
    run->add_option("--theta", args.theta, "Marking parameter in (0, 1)");
    run->add_option("--marking", args.marking, "Marking criterion")->check(CLI::IsMember({"max", "l2"}));
    run->add_option("--recovery", args.recovery, "Gradient recovery weights")
        ->check(CLI::IsMember({"simple", "area", "harmonic", "angle", "distance"}));
    run->add_option("--hmin", args.hmin, "Refinement size floor in mm");
    run->add_option("--vtk-every", args.vtk_every, "Snapshot cadence in steps (0: none)");
    run->add_option("--max-steps", args.max_steps, "Stop after this many load steps");
    run->add_flag("-q,--quiet", args.quiet, "Only print the summary");

    auto *list = app.add_subcommand("list", "List the builtin scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto &n : builtin_scenarios())
                std::cout << n << '\n';
            return 0;
        }
        return run_command(args);
    } catch (const Error &e) {
        std::fprintf(stderr, "error [%s]: %s\n", to_string(e.category()), e.what());
        return exit_code(e.category());
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
