#ifndef BNC_CLI_HPP
#define BNC_CLI_HPP

/*
 * Command implementations behind the executable: figure presets
 * (steady-states, dissipation), the end-to-end strategy run, a standalone
 * local steering solve, and the property-check suite.  Each command writes
 * CSV plus a native SVG with the same data and prints a short table.
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "config.hpp"
#include "control_pipeline.hpp"
#include "csv.hpp"
#include "diagnostics.hpp"
#include "local_control.hpp"
#include "pde_core.hpp"
#include "solver.hpp"
#include "steady_state.hpp"
#include "svg.hpp"
#include "thread_pool.hpp"

namespace bnc {
namespace cli {

struct RunConfig {
    ModelParams model;
    std::size_t n_cells = 256;
    solver::SolverConfig solver_cfg;
    std::string experiment = "checks";
    std::string output_dir = "out";
    std::uint64_t seed = 12345;
    std::vector<double> gammas;   /* empty: per-command defaults */
    std::vector<double> thetas;
    double eta = 0.05;
    double theta = 0.0;           /* strategy: pinned theta; dissipation: residue theta */
    double t_final = 0.0;         /* 0: per-command default */
    double amplitude = 0.0;       /* initial-data amplitude; 0: per-command default */
    bool inject_flux_fault = false;   /* checks: corrupt the flux sign on purpose */

    void validate() const
    {
        model.validate();
        solver_cfg.validate();
        if (n_cells < 8)
            throw InvalidParams("config: n_cells must be at least 8");
        for (double th : thetas)
            if (!(th > 0.0))
                throw InvalidParams("config: theta values must be positive (got " +
                                    csv::num(th) + ")");
        if (!(eta > 0.0))
            throw InvalidParams("config: eta must be positive");
    }
};

/* Layer defaults from a config file; command-line flags override afterwards. */
inline RunConfig apply_config_file(RunConfig cfg, const std::string& path)
{
    const config::File f = config::File::parse_file(path);

    cfg.model.gamma = f.get_double("model", "gamma", cfg.model.gamma);
    const std::string flux = f.get("model", "flux", cfg.model.flux_variant == FluxVariant::E ? "E" : "F");
    if (flux == "E" || flux == "e")
        cfg.model.flux_variant = FluxVariant::E;
    else if (flux == "F" || flux == "f")
        cfg.model.flux_variant = FluxVariant::F;
    else
        throw config::ParseError("config: model.flux must be E or F, got '" + flux + "'");
    cfg.model.horizon_T = f.get_double("model", "horizon", cfg.model.horizon_T);

    cfg.n_cells = static_cast<std::size_t>(f.get_int("grid", "cells", static_cast<long long>(cfg.n_cells)));

    cfg.solver_cfg.dt_max = f.get_double("solver", "dt_max", cfg.solver_cfg.dt_max);
    cfg.solver_cfg.cfl_safety = f.get_double("solver", "cfl_safety", cfg.solver_cfg.cfl_safety);
    cfg.solver_cfg.theta_method = f.get_double("solver", "theta_method", cfg.solver_cfg.theta_method);
    cfg.solver_cfg.snapshot_stride = static_cast<std::size_t>(
        f.get_int("solver", "snapshot_stride", static_cast<long long>(cfg.solver_cfg.snapshot_stride)));
    cfg.solver_cfg.diagnostics_stride = static_cast<std::size_t>(f.get_int(
        "solver", "diagnostics_stride", static_cast<long long>(cfg.solver_cfg.diagnostics_stride)));

    cfg.experiment = f.get("run", "experiment", cfg.experiment);
    cfg.output_dir = f.get("run", "out", cfg.output_dir);
    cfg.seed = static_cast<std::uint64_t>(f.get_int("run", "seed", static_cast<long long>(cfg.seed)));
    cfg.gammas = f.get_list("run", "gammas", cfg.gammas);
    cfg.thetas = f.get_list("run", "thetas", cfg.thetas);
    cfg.eta = f.get_double("run", "eta", cfg.eta);
    cfg.theta = f.get_double("run", "theta", cfg.theta);
    cfg.t_final = f.get_double("run", "t_final", cfg.t_final);
    cfg.amplitude = f.get_double("run", "amplitude", cfg.amplitude);
    return cfg;
}

namespace detail {

inline std::string out_path(const RunConfig& cfg, const std::string& name)
{
    std::filesystem::create_directories(cfg.output_dir);
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

inline double now_seconds()
{
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

}   // namespace detail

/* Residue data entering the passive stage: y = -2 eta - theta on the layer
 * strip x >= 1 - w, w = Ct * theta^(-alpha), with Ct measured from the
 * steady-state family. */
struct ResidueSetup {
    double c_tilde = 0.0;
    double alpha = 0.0;
    double width = 0.0;
    Field data;
};

inline ResidueSetup make_residue(double gamma, double theta, double eta, const Grid& grid,
                                 const std::vector<double>& measure_thetas = {8.0, 16.0, 32.0, 64.0})
{
    ResidueSetup r;
    r.alpha = 0.5 * (0.5 + (gamma - 1.0));
    const Grid fine{2048};
    r.c_tilde = steady_state::measure_layer_constant(gamma, r.alpha, eta, measure_thetas, fine);
    r.width = std::min(0.5, r.c_tilde * pow_abs(theta, -r.alpha));
    r.data = Field(grid, 0.0);
    for (std::size_t i = 0; i <= grid.n_cells; ++i)
        r.data.values[i] = -2.0 * eta - (grid.x(i) >= 1.0 - r.width ? theta : 0.0);
    r.data.values[0] = 0.0;
    r.data.values[grid.n_cells] = 0.0;
    return r;
}

inline ControlSchedule zero_schedule(double t_end)
{
    ControlSchedule s;
    s.u.add(0.0, 0.0);
    s.u.add(t_end, 0.0);
    s.v.add(0.0, 0.0);
    s.v.add(t_end, 0.0);
    s.w.add(0.0, 0.0);
    s.w.add(t_end, 0.0);
    return s;
}

/* ------------------------------------------------------------------ */
/* steady-states                                                      */
/* ------------------------------------------------------------------ */

inline int cmd_steady_states(const RunConfig& cfg)
{
    cfg.validate();
    const std::vector<double> gammas = cfg.gammas.empty() ? std::vector<double>{1.5, 2.0, 3.0, 5.0} : cfg.gammas;
    const std::vector<double> thetas = cfg.thetas.empty() ? std::vector<double>{2.0, 5.0} : cfg.thetas;
    for (double th : thetas)
        if (!(th > 0.0))
            throw InvalidParams("steady-states: theta must be positive, got " + csv::num(th));

    const Grid grid{cfg.n_cells};
    struct Item {
        double gamma, theta;
        steady_state::SteadyStateProfile prof;
    };
    std::vector<Item> items;
    for (double g : gammas)
        for (double th : thetas)
            items.push_back({g, th, {}});

    pool::parallel_for(items.size(), [&](std::size_t i) {
        items[i].prof = steady_state::solve_steady(items[i].theta, items[i].gamma, grid, 1e-30);
    });

    csv::Writer out(detail::out_path(cfg, "profiles.csv"), {"gamma", "theta", "x", "value"});
    std::vector<svg::Series> series;
    for (const auto& it : items) {
        svg::Series s;
        s.label = "gamma=" + csv::num(it.gamma) + " theta=" + csv::num(it.theta);
        for (std::size_t i = 0; i <= grid.n_cells; ++i) {
            out.row({it.gamma, it.theta, grid.x(i), it.prof.samples[i]});
            s.x.push_back(grid.x(i));
            s.y.push_back(it.prof.samples[i]);
        }
        series.push_back(std::move(s));
    }
    out.close();

    svg::ChartOptions copt;
    copt.title = "Steady profiles";
    copt.x_label = "x";
    copt.y_label = "profile";
    svg::write_line_chart(detail::out_path(cfg, "steady_states.svg"), series, copt);

    bool all_ok = true;
    std::cout << "gamma   theta   slope_right        bracket (-theta^g - theta, -theta^g)   ok\n";
    for (const auto& it : items) {
        const double hi = -pow_abs(it.theta, it.gamma);
        const double lo = hi - it.theta;
        /* upper edge to a few ulp: the continuum gap is exponentially small */
        const bool ok = it.prof.slope_right > lo &&
                        it.prof.slope_right <
                            hi + 8.0 * std::numeric_limits<double>::epsilon() * std::abs(hi);
        all_ok = all_ok && ok;
        std::cout << std::left << std::setw(8) << it.gamma << std::setw(8) << it.theta
                  << std::setw(19) << it.prof.slope_right << "(" << csv::num(lo) << ", "
                  << csv::num(hi) << ")   " << (ok ? "yes" : "NO") << "\n";
    }
    std::cout << (all_ok ? "slope bracket holds for all profiles\n"
                         : "slope bracket VIOLATED, see table\n");
    return all_ok ? 0 : 4;
}

/* ------------------------------------------------------------------ */
/* dissipation                                                        */
/* ------------------------------------------------------------------ */

inline int cmd_dissipation(const RunConfig& cfg)
{
    cfg.validate();
    const std::vector<double> gammas =
        cfg.gammas.empty() ? std::vector<double>{1.75, 2.0, 2.5, 3.0} : cfg.gammas;
    const double theta = cfg.theta > 0.0 ? cfg.theta : 32.0;
    const double t_end = cfg.t_final > 0.0 ? cfg.t_final : 1.0;
    const Grid grid{cfg.n_cells};

    struct Run {
        double gamma = 0.0;
        double t_half = 0.0;
        std::vector<double> ts, sups;   /* downsampled for csv + svg */
        diagnostics::FunctionalReport envelope;
        bool has_envelope = false;
        double l1_entry = 0.0;
    };
    std::vector<Run> runs(gammas.size());

    pool::parallel_for(gammas.size(), [&](std::size_t i) {
        Run& r = runs[i];
        r.gamma = gammas[i];
        ModelParams p;
        p.gamma = r.gamma;
        p.flux_variant = FluxVariant::E;   /* negative residue rides the odd flux */
        p.horizon_T = t_end;

        const ResidueSetup res = make_residue(r.gamma, theta, cfg.eta, grid);
        solver::SolverConfig scfg = cfg.solver_cfg;
        scfg.snapshot_stride = 0;
        scfg.diagnostics_stride = 1;
        const Trajectory traj =
            solver::solve(res.data, zero_schedule(t_end), p, grid, scfg, t_end);

        r.t_half = diagnostics::time_to_fraction(traj, 0.5);
        const TimeSeries& sup = traj.diagnostics.at("sup_norm");
        const std::size_t stride = std::max<std::size_t>(1, sup.size() / 4000);
        for (std::size_t k = 0; k < sup.size(); k += stride) {
            r.ts.push_back(sup.times[k]);
            r.sups.push_back(sup.values[k]);
        }
        if (r.ts.back() != sup.times.back()) {
            r.ts.push_back(sup.times.back());
            r.sups.push_back(sup.values.back());
        }
        r.l1_entry = traj.diagnostics.at("l1_norm").values.front();
        if (r.gamma >= 2.0) {
            r.envelope = diagnostics::smoothing_bound_check(traj, p, grid);
            r.has_envelope = true;
        }
    });

    csv::Writer out(detail::out_path(cfg, "supnorm.csv"), {"gamma", "t", "sup"});
    std::vector<svg::Series> series;
    for (const auto& r : runs) {
        svg::Series s;
        s.label = "gamma=" + csv::num(r.gamma);
        for (std::size_t k = 0; k < r.ts.size(); ++k) {
            out.row({r.gamma, r.ts[k], r.sups[k]});
            s.x.push_back(r.ts[k]);
            s.y.push_back(r.sups[k]);
        }
        series.push_back(std::move(s));
    }
    out.close();

    svg::ChartOptions copt;
    copt.title = "Residue sup-norm decay, theta = " + csv::num(theta);
    copt.x_label = "t";
    copt.y_label = "sup |y|";
    copt.log_y = true;
    svg::write_line_chart(detail::out_path(cfg, "dissipation.svg"), series, copt);

    bool nonincreasing = true;
    std::cout << "gamma   time-to-half\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::cout << std::left << std::setw(8) << runs[i].gamma << csv::num(runs[i].t_half) << "\n";
        if (i > 0 && std::isfinite(runs[i].t_half) && std::isfinite(runs[i - 1].t_half) &&
            runs[i].t_half > runs[i - 1].t_half * (1.0 + 1e-9))
            nonincreasing = false;
        if (!std::isfinite(runs[i].t_half))
            nonincreasing = false;
    }
    std::cout << (nonincreasing ? "time-to-half is nonincreasing in gamma\n"
                                : "time-to-half is NOT nonincreasing in gamma\n");

    bool envelope_ok = true;
    for (const auto& r : runs)
        if (r.has_envelope) {
            envelope_ok = envelope_ok && r.envelope.passed;
            std::cout << "gamma=" << r.gamma << " smoothing envelope: value " << r.envelope.value
                      << " bound " << r.envelope.bound << " -> " << (r.envelope.passed ? "pass" : "FAIL")
                      << "\n";
        }
    return (nonincreasing && envelope_ok) ? 0 : 5;
}

/* ------------------------------------------------------------------ */
/* strategy                                                           */
/* ------------------------------------------------------------------ */

inline Field sine_mode_data(const Grid& grid, double amplitude, int mode)
{
    Field y0(grid, 0.0);
    for (std::size_t i = 0; i <= grid.n_cells; ++i)
        y0.values[i] = amplitude * std::sin(mode * M_PI * grid.x(i));
    return y0;
}

inline int cmd_strategy(const RunConfig& cfg)
{
    cfg.validate();
    const double t0 = detail::now_seconds();
    const Grid grid{cfg.n_cells};
    ModelParams params = cfg.model;
    const double amplitude = cfg.amplitude != 0.0 ? cfg.amplitude : 5.0;
    const Field y0 = sine_mode_data(grid, amplitude, 3);

    solver::SolverConfig scfg = cfg.solver_cfg;
    if (scfg.snapshot_stride == 0)
        scfg.snapshot_stride = 256;
    scfg.diagnostics_stride = std::max<std::size_t>(scfg.diagnostics_stride, 4);

    pipeline::StrategyTargets targets;
    targets.eta = cfg.eta;
    targets.theta = cfg.theta;

    const pipeline::StagePlan plan = pipeline::plan_strategy(y0, params, grid, scfg, targets);
    if (!plan.hypothesis_ok)
        std::cout << "warning: gamma = " << params.gamma
                  << " is outside the guaranteed range (needs gamma > 3/2 for variant E, "
                     ">= 2 for variant F); running without a steering guarantee\n";
    const double needed_cells = 8.0 * pow_abs(plan.theta, params.gamma - 1.0);
    if (static_cast<double>(cfg.n_cells) < needed_cells)
        std::cout << "warning: n_cells = " << cfg.n_cells << " underresolves the boundary layer (want >= "
                  << csv::num(needed_cells) << " for theta = " << plan.theta << ")\n";
    const double t_plan = detail::now_seconds();

    const pipeline::StrategyResult res =
        pipeline::run_strategy(plan, y0, params, grid, scfg, /*throw_on_failure=*/false);
    const double t_run = detail::now_seconds();

    /* downsample frames for the heat map and its sibling csv */
    const auto& snaps = res.trajectory.snapshots;
    const std::size_t fstride = std::max<std::size_t>(1, snaps.size() / 240);
    const std::size_t xstride = std::max<std::size_t>(1, grid.n_nodes() / 256);
    std::vector<double> times, xs;
    std::vector<std::vector<double>> frames;
    for (std::size_t i = 0; i <= grid.n_cells; i += xstride)
        xs.push_back(grid.x(i));
    if (xs.back() != 1.0)
        xs.push_back(1.0);
    auto add_frame = [&](const Field& f) {
        times.push_back(f.time);
        std::vector<double> row;
        for (std::size_t i = 0; i <= grid.n_cells; i += xstride)
            row.push_back(f[i]);
        if (row.size() < xs.size())
            row.push_back(f[grid.n_cells]);
        frames.push_back(std::move(row));
    };
    for (std::size_t k = 0; k < snaps.size(); k += fstride)
        add_frame(snaps[k]);
    if (times.back() != snaps.back().time)
        add_frame(snaps.back());

    csv::Writer tout(detail::out_path(cfg, "trajectory.csv"), {"t", "x", "y"});
    for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t i = 0; i < xs.size(); ++i)
            tout.row({times[k], xs[i], frames[k][i]});
    tout.close();

    svg::HeatmapOptions hopt;
    hopt.title = "State over space-time";
    hopt.vlines.assign(res.plan.stage_times, res.plan.stage_times + 4);
    svg::write_heatmap(detail::out_path(cfg, "strategy.svg"), times, xs, frames, hopt);

    /* controls: knot times plus a dense sweep */
    std::vector<double> ct;
    for (const auto& k : res.plan.schedule.u.knots)
        ct.push_back(k.first);
    for (const auto& k : res.plan.schedule.v.knots)
        ct.push_back(k.first);
    const double T = params.horizon_T;
    for (int i = 0; i <= 2000; ++i)
        ct.push_back(T * i / 2000.0);
    std::sort(ct.begin(), ct.end());
    ct.erase(std::unique(ct.begin(), ct.end()), ct.end());
    csv::Writer cout_(detail::out_path(cfg, "controls.csv"), {"t", "u", "v"});
    for (double t : ct)
        cout_.row({t, res.plan.schedule.u.eval(t), res.plan.schedule.v.eval(t)});
    cout_.close();

    std::ostringstream rep;
    rep << "plan: theta = " << res.plan.theta << (res.plan.theta_was_swept ? " (from sweep)" : " (pinned)")
        << ", eta = " << res.plan.eta << ", pump window = " << res.plan.t_prime1
        << ", drain window = " << res.plan.t_prime2 << "\n"
        << "stage times: " << res.plan.stage_times[0] << ", " << res.plan.stage_times[1] << ", "
        << res.plan.stage_times[2] << ", " << res.plan.stage_times[3] << "\n"
        << "exit tolerances: stage1 " << res.plan.tol_stage1 << ", stage2 " << res.plan.tol_stage2
        << ", stage3 sup bound " << res.plan.stage3_bound << ", terminal L2 target "
        << res.plan.terminal_target << "\n";
    if (!res.plan.notes.empty())
        rep << "notes: " << res.plan.notes << "\n";
    rep << "\n" << pipeline::summarize_reports(res);
    rep << "\noptimizer: " << (res.stage4.status == local_control::OptimizeStatus::Converged
                                   ? "converged"
                                   : "target missed")
        << ", iterations = " << res.stage4.iterations << ", terminal L2 = " << res.stage4.terminal_l2
        << "\n";
    rep << "timing: planning " << csv::num(t_plan - t0) << " s, stages " << csv::num(t_run - t_plan)
        << " s\n";
    rep << (res.all_passed ? "ALL STAGES PASSED\n" : "AT LEAST ONE STAGE FAILED\n");

    {
        std::ofstream f(detail::out_path(cfg, "stage_report.txt"), std::ios::binary);
        f << rep.str();
    }
    std::cout << rep.str();
    if (!res.all_passed)
        for (const auto& r : res.reports)
            if (!r.hard_passed())
                std::cout << "StageFailed: stage " << r.stage << " missed its exit tolerance\n";
    return res.all_passed ? 0 : 2;
}

/* ------------------------------------------------------------------ */
/* local-control                                                      */
/* ------------------------------------------------------------------ */

inline int cmd_local_control(const RunConfig& cfg)
{
    cfg.validate();
    const Grid grid{cfg.n_cells};
    const double amplitude = cfg.amplitude != 0.0 ? cfg.amplitude : 0.15;

    local_control::LocalProblem prob;
    prob.y_in = sine_mode_data(grid, amplitude, 1);
    prob.stage_T = cfg.t_final > 0.0 ? cfg.t_final : 0.25;
    prob.params = cfg.model;
    prob.grid = grid;
    prob.theta_method = cfg.solver_cfg.theta_method;
    prob.n_steps = local_control::suggest_steps(prob.stage_T, grid, std::max(4.0 * amplitude, 0.5),
                                                cfg.model, cfg.solver_cfg.dt_max);
    if (!prob.smallness_ok())
        std::cout << "warning: entry amplitude " << amplitude
                  << " exceeds the smallness threshold 1/(2 gamma) = "
                  << 1.0 / (2.0 * cfg.model.gamma) << "; steering may miss the target\n";

    const local_control::OptimizeResult res = local_control::optimize(prob);
    const Trajectory traj = local_control::rollout(prob, res.control, 0.0,
                                                   std::max<std::size_t>(prob.n_steps / 200, 1));

    csv::Writer trace(detail::out_path(cfg, "local_trace.csv"),
                      {"iter", "alpha", "objective", "grad_norm", "terminal_l2"});
    for (std::size_t i = 0; i < res.trace.size(); ++i)
        trace.row({static_cast<double>(i), res.trace[i].alpha, res.trace[i].objective,
                   res.trace[i].grad_norm, res.trace[i].terminal_l2});
    trace.close();

    csv::Writer ctl(detail::out_path(cfg, "local_control.csv"), {"t", "v"});
    svg::Series vs;
    vs.label = "v(t)";
    const double dt = prob.dt();
    for (std::size_t k = 0; k < res.control.values.size(); ++k) {
        ctl.row({k * dt, res.control.values[k]});
        vs.x.push_back(k * dt);
        vs.y.push_back(res.control.values[k]);
    }
    ctl.close();

    csv::Writer st(detail::out_path(cfg, "local_state.csv"), {"x", "y_in", "y_terminal"});
    for (std::size_t i = 0; i <= grid.n_cells; ++i)
        st.row({grid.x(i), prob.y_in[i], traj.final()[i]});
    st.close();

    svg::ChartOptions copt;
    copt.title = "Boundary control";
    copt.x_label = "t";
    copt.y_label = "v";
    svg::write_line_chart(detail::out_path(cfg, "local_control.svg"), {vs}, copt);

    std::cout << "status: "
              << (res.status == local_control::OptimizeStatus::Converged ? "converged" : "target missed")
              << ", iterations = " << res.iterations << ", objective = " << csv::num(res.objective)
              << ", terminal L2 = " << csv::num(res.terminal_l2) << "\n";
    return res.status == local_control::OptimizeStatus::Converged ? 0 : 3;
}

/* ------------------------------------------------------------------ */
/* checks                                                             */
/* ------------------------------------------------------------------ */

struct CheckRow {
    std::string suite;
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool passed = false;
    bool not_applicable = false;
    std::string note;
};

namespace detail {

inline void suite_oracle(const RunConfig& cfg, std::vector<CheckRow>& rows)
{
    const Grid grid{2048};
    for (double theta : {2.0, 5.0}) {
        const auto prof = steady_state::solve_steady(theta, 2.0, grid);
        double dev = 0.0;
        for (std::size_t i = 0; i <= grid.n_cells; ++i)
            dev = std::max(dev, std::abs(prof.samples[i] - steady_state::gamma2_profile(theta, grid.x(i))));
        rows.push_back({"oracle", "gamma2_tanh_theta" + csv::num(theta), dev, 1e-6, dev <= 1e-6, false,
                        "sup deviation from the tanh closed form"});
    }
    for (double theta : {1.0, 2.0, 5.0}) {
        const auto prof = steady_state::solve_steady(theta, 1.0, grid);
        double dev = 0.0;
        for (std::size_t i = 0; i <= grid.n_cells; ++i)
            dev = std::max(dev, std::abs(prof.samples[i] - steady_state::gamma1_profile(theta, grid.x(i))));
        rows.push_back({"oracle", "gamma1_exact_theta" + csv::num(theta), dev, 1e-8, dev <= 1e-8, false,
                        "sup deviation from the exponential closed form"});
    }

    std::mt19937_64 rng(cfg.seed + 17);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (double gamma : {1.5, 2.5})
        for (FluxVariant var : {FluxVariant::E, FluxVariant::F}) {
            ModelParams mp;
            mp.gamma = gamma;
            mp.flux_variant = var;
            double worst = 0.0;
            for (int k = 0; k < 100; ++k) {
                double y = uni(rng);
                while (std::abs(y) < 1e-3)
                    y = uni(rng);
                const double eps = 1e-6 * std::max(1.0, std::abs(y));
                const double fd = (flux(y + eps, mp) - flux(y - eps, mp)) / (2.0 * eps);
                const double an = flux_prime(y, mp);
                worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
            }
            rows.push_back({"oracle",
                            std::string("flux_prime_fd_g") + csv::num(gamma) + "_" + to_string(var),
                            worst, 1e-6, worst <= 1e-6, false, "relative centered-difference error"});
        }
}

inline void suite_bracket(const RunConfig&, std::vector<CheckRow>& rows)
{
    const Grid grid{512};
    const double eps = std::numeric_limits<double>::epsilon();
    for (double gamma : {1.5, 2.0, 3.0}) {
        double prev = 0.0;
        bool monotone = true;
        bool inside = true;
        for (double theta : {1.0, 5.0, 20.0}) {
            const auto prof = steady_state::solve_steady(theta, gamma, grid, 1e-30);
            const double hi = -pow_abs(theta, gamma);
            const double lo = hi - theta;
            /* the continuum gap -theta^gamma - C ~ exp(-gamma theta^(gamma-1))
             * falls below one ulp of theta^gamma for large theta; certify the
             * strict upper edge only to a few ulp. */
            inside = inside && prof.slope_right > lo &&
                     prof.slope_right < hi + 8.0 * eps * std::abs(hi);
            if (theta > 1.0)
                monotone = monotone && prof.slope_right < prev;
            prev = prof.slope_right;
        }
        rows.push_back({"bracket", "slope_bracket_g" + csv::num(gamma), inside ? 1.0 : 0.0, 1.0,
                        inside, false, "inside (-theta^g - theta, -theta^g), ulp slack up top"});
        rows.push_back({"bracket", "slope_monotone_g" + csv::num(gamma), monotone ? 1.0 : 0.0, 1.0,
                        monotone, false, "slope decreasing in theta"});
    }
}

inline void suite_comparison(const RunConfig& cfg, std::vector<CheckRow>& rows)
{
    const std::size_t n = std::min<std::size_t>(std::max<std::size_t>(cfg.n_cells, 32), 128);
    const Grid grid{n};
    const double T = 0.25;
    const double gamma = 2.0;
    std::mt19937_64 rng(cfg.seed + 23);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    /* amplitudes below stay under 6, so this fixed dt never trips the CFL */
    solver::SolverConfig scfg;
    scfg.theta_method = 1.0;
    scfg.cfl_safety = 0.999;
    scfg.dt_max = 0.5 * grid.h() / (gamma * pow_abs(6.0, gamma - 1.0));
    scfg.snapshot_stride = 4;
    scfg.diagnostics_stride = 1000000;

    double worst = 0.0;
    for (int pair = 0; pair < 20; ++pair) {
        Field lo(grid, 0.0), hi(grid, 0.0);
        const double a1 = uni(rng), a2 = uni(rng), a3 = uni(rng), bump = uni(rng);
        for (std::size_t i = 0; i <= n; ++i) {
            const double x = grid.x(i);
            const double base = -3.0 + a1 * std::sin(M_PI * x) - a2 * std::sin(2.0 * M_PI * x) +
                                a3 * std::sin(3.0 * M_PI * x);
            lo.values[i] = base;
            hi.values[i] = base + bump * std::sin(M_PI * x) * std::sin(M_PI * x);
        }
        ControlSchedule slo = zero_schedule(T), shi = zero_schedule(T);
        const double vlo = -0.6 + 0.2 * uni(rng), dv = 0.3 * uni(rng);
        slo.v = ControlKnots{};
        slo.v.add(0.0, vlo);
        slo.v.add(T, vlo - 0.2);
        shi.v = ControlKnots{};
        shi.v.add(0.0, vlo + dv);
        shi.v.add(T, vlo - 0.2 + dv);
        const double wlo = -0.4 * uni(rng), dw = 0.2 * uni(rng);
        slo.w = ControlKnots{};
        slo.w.add(0.0, wlo);
        slo.w.add(T, wlo);
        shi.w = ControlKnots{};
        shi.w.add(0.0, wlo + dw);
        shi.w.add(T, wlo + dw);

        ModelParams plo;
        plo.gamma = gamma;
        plo.flux_variant = FluxVariant::E;
        ModelParams phi = plo;
        if (cfg.inject_flux_fault)
            phi.flux_variant = FluxVariant::F;   /* sign-flips the flux on negative data */

        const Trajectory tlo = solver::solve(lo, slo, plo, grid, scfg, T);
        const Trajectory thi = solver::solve(hi, shi, phi, grid, scfg, T);
        const auto rep = diagnostics::comparison_check(tlo, thi);
        worst = std::min(worst, rep.value);
    }
    rows.push_back({"comparison", "ordered_pairs_stay_ordered", worst, -1e-10, worst >= -1e-10, false,
                    cfg.inject_flux_fault ? "flux sign deliberately corrupted on the upper run"
                                          : "worst min(hi - lo) over 20 pairs"});
}

inline void suite_gradient(const RunConfig& cfg, std::vector<CheckRow>& rows)
{
    for (double gamma : {1.75, 2.5}) {
        const Grid grid{48};
        local_control::LocalProblem prob;
        prob.grid = grid;
        prob.params.gamma = gamma;
        prob.params.flux_variant = FluxVariant::E;
        prob.stage_T = 0.2;
        prob.n_steps = 96;
        std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(100.0 * gamma));
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        prob.y_in = Field(grid, 0.0);
        for (std::size_t i = 1; i < grid.n_cells; ++i)
            prob.y_in.values[i] = 0.1 * std::sin(M_PI * grid.x(i)) + 0.02 * uni(rng);

        local_control::ControlVector v;
        v.values.resize(prob.n_steps + 1);
        for (auto& x : v.values)
            x = 0.1 * uni(rng);

        const local_control::ControlVector g = local_control::gradient(v, prob);
        double worst = 0.0;
        for (int dir = 0; dir < 4; ++dir) {
            local_control::ControlVector d;
            d.values.resize(v.values.size());
            for (auto& x : d.values)
                x = uni(rng);
            double an = 0.0;
            for (std::size_t k = 0; k < d.values.size(); ++k)
                an += g.values[k] * d.values[k];
            const double eps = 1e-5;
            local_control::ControlVector vp = v, vm = v;
            for (std::size_t k = 0; k < d.values.size(); ++k) {
                vp.values[k] += eps * d.values[k];
                vm.values[k] -= eps * d.values[k];
            }
            const double fd =
                (local_control::objective(vp, prob) - local_control::objective(vm, prob)) / (2.0 * eps);
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-12));
        }
        rows.push_back({"gradient", "adjoint_vs_fd_g" + csv::num(gamma), worst, 1e-5, worst <= 1e-5,
                        false, "relative error over 4 random directions"});
    }
}

inline void suite_convergence(const RunConfig& cfg, std::vector<CheckRow>& rows)
{
    if (cfg.n_cells < 32) {
        rows.push_back({"convergence", "heat_spatial_order", 0.0, 0.0, true, true,
                        "not applicable below 32 cells"});
        rows.push_back({"convergence", "advective_spatial_order", 0.0, 0.0, true, true,
                        "not applicable below 32 cells"});
        return;
    }
    const auto heat =
        diagnostics::convergence_order(diagnostics::ConvergenceProblem::HeatAnalytic, 32, 3, 0.1);
    rows.push_back({"convergence", "heat_spatial_order", heat.order, 2.0,
                    heat.order >= 1.8 && heat.order <= 2.2, false, "target 2 +/- 0.2"});
    const auto adv =
        diagnostics::convergence_order(diagnostics::ConvergenceProblem::AdvectiveFront, 32, 3, 0.1);
    rows.push_back({"convergence", "advective_spatial_order", adv.order, 0.9, adv.order >= 0.9, false,
                    "upwind transport, target >= 0.9"});
}

inline void suite_bounds(const RunConfig& cfg, std::vector<CheckRow>& rows)
{
    {   /* discrete energy balance without advection */
        const Grid grid{128};
        Field y0(grid, 0.0);
        for (std::size_t i = 0; i <= grid.n_cells; ++i)
            y0.values[i] = 0.8 * std::sin(2.0 * M_PI * grid.x(i)) + 0.3 * std::sin(M_PI * grid.x(i));
        y0.values[0] = y0.values[grid.n_cells] = 0.0;
        ControlKnots u;
        u.add(0.0, 0.4);
        u.add(0.3, -0.2);
        ModelParams p;
        p.gamma = 2.0;
        solver::SolverConfig scfg;
        scfg.dt_max = 2e-5;
        const auto rep = diagnostics::energy_identity_check(y0, u, p, grid, scfg, 0.3);
        rows.push_back({"bounds", "energy_identity", rep.value, rep.bound, rep.passed, false,
                        "relative defect of the discrete balance"});
    }
    {   /* entry moment against the closed form */
        const double theta = 16.0, gamma = 2.5;
        const Grid grid{std::max<std::size_t>(cfg.n_cells, 128)};
        const ResidueSetup res = make_residue(gamma, theta, cfg.eta, grid);
        const double measured = diagnostics::moment_x_minus_1(res.data, grid);
        const double closed =
            0.5 * res.c_tilde * res.c_tilde * pow_abs(theta, 1.0 - 2.0 * res.alpha) + cfg.eta;
        const double slack = grid.h() * (theta + 2.0 * cfg.eta);
        const double dev = std::abs(measured - closed);
        rows.push_back({"bounds", "residue_moment_closed_form", dev, slack, dev <= slack, false,
                        "theta = 16, quadrature slack h (theta + 2 eta)"});
    }
    {   /* smoothing envelope and the space-time flux mass */
        const double theta = 8.0;
        const Grid grid{192};
        solver::SolverConfig scfg;
        scfg.snapshot_stride = 0;
        scfg.diagnostics_stride = 1;
        {
            ModelParams p;
            p.gamma = 2.0;
            const ResidueSetup res = make_residue(p.gamma, theta, cfg.eta, grid);
            const Trajectory traj = solver::solve(res.data, zero_schedule(0.5), p, grid, scfg, 0.5);
            const auto rep = diagnostics::smoothing_bound_check(traj, p, grid);
            rows.push_back({"bounds", "smoothing_envelope_g2", rep.value, rep.bound, rep.passed, false,
                            rep.notes});
        }
        {
            ModelParams p;
            p.gamma = 1.75;
            const ResidueSetup res = make_residue(p.gamma, theta, cfg.eta, grid);
            const Trajectory traj = solver::solve(res.data, zero_schedule(0.5), p, grid, scfg, 0.5);
            const double mass = diagnostics::lgamma_spacetime(traj, 0.0, 0.5);
            const double entry = diagnostics::moment_x_minus_1(res.data, grid);
            const double bound = 1.05 * entry + grid.h() * (theta + 2.0 * cfg.eta);
            rows.push_back({"bounds", "flux_mass_vs_entry_moment", mass, bound, mass <= bound, false,
                            "space-time integral of |y|^gamma bounded by the entry moment"});
        }
    }
}

}   // namespace detail

inline std::vector<CheckRow> run_all_checks(const RunConfig& cfg)
{
    cfg.validate();
    std::vector<CheckRow> rows;
    detail::suite_oracle(cfg, rows);
    detail::suite_bracket(cfg, rows);
    detail::suite_comparison(cfg, rows);
    detail::suite_gradient(cfg, rows);
    detail::suite_convergence(cfg, rows);
    detail::suite_bounds(cfg, rows);
    return rows;
}

inline int cmd_checks(const RunConfig& cfg)
{
    const std::vector<CheckRow> rows = run_all_checks(cfg);
    bool all = true;
    std::cout << std::left << std::setw(13) << "suite" << std::setw(34) << "check" << std::setw(20)
              << "value" << std::setw(20) << "bound" << "status\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(13) << r.suite << std::setw(34) << r.name << std::setw(20)
                  << csv::num(r.value) << std::setw(20) << csv::num(r.bound)
                  << (r.not_applicable ? "n/a" : (r.passed ? "PASS" : "FAIL")) << "\n";
        if (!r.not_applicable && !r.passed)
            all = false;
    }
    std::cout << (all ? "all checks passed\n" : "CHECK FAILURES present\n");
    return all ? 0 : 1;
}

inline int run(const RunConfig& cfg)
{
    if (cfg.experiment == "steady-states")
        return cmd_steady_states(cfg);
    if (cfg.experiment == "dissipation")
        return cmd_dissipation(cfg);
    if (cfg.experiment == "strategy")
        return cmd_strategy(cfg);
    if (cfg.experiment == "local-control")
        return cmd_local_control(cfg);
    if (cfg.experiment == "checks")
        return cmd_checks(cfg);
    throw InvalidParams("unknown experiment '" + cfg.experiment + "'");
}

}   // namespace cli
}   // namespace bnc

#endif
