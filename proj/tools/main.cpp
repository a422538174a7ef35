/* Command line front end: subcommand dispatch, config-file ingestion and
 * flag overrides.  Precedence: built-in defaults < --config file < flags. */

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <bnc/cli.hpp>

int main(int argc, char** argv)
{
    CLI::App app{"Steering experiments for the viscous generalized Burgers equation on [0,1]"};
    app.require_subcommand(1);

    std::string config_path, out_dir, flux_str;
    double gamma = 0.0, theta = 0.0, t_final = 0.0, eta = 0.0, amplitude = 0.0;
    long long cells = 0, seed = -1;
    bool inject = false;

    app.add_option("--config", config_path, "INI-style config file; flags override it");
    app.add_option("--gamma", gamma, "nonlinearity exponent (> 1)");
    app.add_option("--theta", theta, "profile height: strategy pin / dissipation residue height");
    app.add_option("--cells", cells, "number of grid cells");
    app.add_option("--t-final", t_final, "time horizon override");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "seed for randomized suites");
    app.add_option("--flux", flux_str, "flux variant: E (odd, sgn(y)|y|^g) or F (|y|^g)")
        ->check(CLI::IsMember({"E", "F", "e", "f"}));
    app.add_option("--eta", eta, "strategy band half-height");
    app.add_option("--amplitude", amplitude, "initial-data amplitude (strategy, local-control)");
    app.add_flag("--inject-flux-fault", inject,
                 "checks: corrupt the flux sign on the upper comparison run (must fail)");

    CLI::App* sub_steady = app.add_subcommand("steady-states", "profile family figure + slope table");
    CLI::App* sub_diss = app.add_subcommand("dissipation", "residue decay figure + time-to-half");
    CLI::App* sub_strat = app.add_subcommand("strategy", "full four-stage steering run");
    CLI::App* sub_local = app.add_subcommand("local-control", "standalone terminal steering solve");
    CLI::App* sub_checks = app.add_subcommand("checks", "property-check suite; exit 0 iff all pass");
    for (CLI::App* s : {sub_steady, sub_diss, sub_strat, sub_local, sub_checks})
        s->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        bnc::cli::RunConfig cfg;
        if (!config_path.empty())
            cfg = bnc::cli::apply_config_file(cfg, config_path);
        if (app.count("--gamma"))
            cfg.model.gamma = gamma;
        if (app.count("--theta"))
            cfg.theta = theta;
        if (app.count("--cells"))
            cfg.n_cells = static_cast<std::size_t>(cells);
        if (app.count("--t-final")) {
            cfg.t_final = t_final;
            cfg.model.horizon_T = t_final;
        }
        if (app.count("--out"))
            cfg.output_dir = out_dir;
        if (app.count("--seed"))
            cfg.seed = static_cast<std::uint64_t>(seed);
        if (app.count("--flux"))
            cfg.model.flux_variant =
                (flux_str == "F" || flux_str == "f") ? bnc::FluxVariant::F : bnc::FluxVariant::E;
        if (app.count("--eta"))
            cfg.eta = eta;
        if (app.count("--amplitude"))
            cfg.amplitude = amplitude;
        if (app.count("--inject-flux-fault"))
            cfg.inject_flux_fault = inject;

        if (sub_steady->parsed())
            cfg.experiment = "steady-states";
        else if (sub_diss->parsed())
            cfg.experiment = "dissipation";
        else if (sub_strat->parsed())
            cfg.experiment = "strategy";
        else if (sub_local->parsed())
            cfg.experiment = "local-control";
        else
            cfg.experiment = "checks";

        return bnc::cli::run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
