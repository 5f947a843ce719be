// spinguard: command-line front end for the spin-locking simulator.

#include <CLI11.hpp>

#include "spinguard/cli/commands.hpp"

using namespace spinguard;
using namespace spinguard::cli;

namespace {

Scenario load(const std::string& path, const std::string& out_dir) {
    Scenario sc = load_scenario_file(path);
    if (!out_dir.empty()) sc.output.dir = out_dir;
    return sc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image-tone protected Rabi oscillations: simulation, sweeps, Floquet spectra, fits"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    std::string config, out_dir;

    auto* simulate = app.add_subcommand("simulate", "run one scenario and write t_us,sx,sy,sz");
    simulate->add_option("config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out-dir", out_dir, "override output.dir");

    SweepRequest sweep_req;
    auto* sweep_cmd = app.add_subcommand("sweep", "sweep one drive parameter; write <Sz> and FFT grids");
    sweep_cmd->add_option("config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--param", sweep_req.param, "swept parameter")
        ->required()
        ->check(CLI::IsMember(sweep_params()));
    sweep_cmd->add_option("--from", sweep_req.from, "first value")->required();
    sweep_cmd->add_option("--to", sweep_req.to, "last value");
    sweep_cmd->add_option("--steps", sweep_req.steps, "number of values")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--jobs", sweep_req.jobs, "worker threads (0 = all cores)");
    sweep_cmd->add_option("--out-dir", out_dir, "override output.dir");

    std::optional<int> n_blocks;
    auto* floquet = app.add_subcommand("floquet", "quasi-energies and the splitting at the crossing");
    floquet->add_option("config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    floquet->add_option("--n-blocks", n_blocks, "Floquet blocks kept")->check(CLI::PositiveNumber);
    floquet->add_option("--out-dir", out_dir, "override output.dir");

    FitRequest fit_req;
    auto* fit = app.add_subcommand("fit", "fit an exponential or damped-cosine envelope to a CSV column");
    fit->add_option("input", fit_req.input, "CSV with a header row")->required()->check(CLI::ExistingFile);
    fit->add_option("--model", fit_req.model, "plain_exp or damped_cos")
        ->check(CLI::IsMember({"plain_exp", "damped_cos"}));
    fit->add_option("--column", fit_req.column, "column to fit");
    fit->add_option("--time-column", fit_req.time_column, "time column");
    fit->add_option("--out", fit_req.out, "also write the result JSON here");

    app.add_subcommand("materials", "list material presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    if (sweep_cmd->parsed() && sweep_req.steps > 1 && sweep_cmd->count("--to") == 0) {
        std::cerr << "error: --to is required when --steps > 1\n";
        return kUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(load(config, out_dir));
        if (sweep_cmd->parsed()) return cmd_sweep(load(config, out_dir), sweep_req);
        if (floquet->parsed()) return cmd_floquet(load(config, out_dir), n_blocks);
        if (fit->parsed()) return cmd_fit(fit_req);
        return cmd_materials();
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
