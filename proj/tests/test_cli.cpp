#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <bnc/cli.hpp>

using namespace bnc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path dir;
    explicit TempDir(const char* name) : dir(fs::path("/tmp") / name)
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string str() const { return dir.string(); }
    std::string file(const char* name) const { return (dir / name).string(); }
};

}   // namespace

TEST_CASE("the default check battery is green")
{
    cli::RunConfig cfg;
    const auto rows = cli::run_all_checks(cfg);
    CHECK(rows.size() >= 15);
    for (const auto& r : rows) {
        INFO(r.suite << "/" << r.name << ": value " << r.value << " bound " << r.bound);
        CHECK((r.passed || r.not_applicable));
    }
    /* every suite reported something */
    for (const char* suite :
         {"oracle", "bracket", "comparison", "gradient", "convergence", "bounds"}) {
        bool seen = false;
        for (const auto& r : rows)
            seen = seen || r.suite == suite;
        INFO(suite);
        CHECK(seen);
    }
}

TEST_CASE("an injected flux fault is caught by the comparison suite")
{
    cli::RunConfig cfg;
    cfg.inject_flux_fault = true;
    const auto rows = cli::run_all_checks(cfg);
    bool comparison_failed = false;
    for (const auto& r : rows)
        if (r.suite == "comparison" && !r.not_applicable && !r.passed)
            comparison_failed = true;
    CHECK(comparison_failed);
}

TEST_CASE("coarse grids mark convergence not applicable, the rest still runs")
{
    cli::RunConfig cfg;
    cfg.n_cells = 16;
    const auto rows = cli::run_all_checks(cfg);
    std::size_t na = 0;
    for (const auto& r : rows) {
        if (r.suite == "convergence") {
            CHECK(r.not_applicable);
            ++na;
        } else {
            INFO(r.suite << "/" << r.name);
            CHECK(r.passed);
        }
    }
    CHECK(na == 2);
}

TEST_CASE("config files layer under the built-in defaults")
{
    TempDir tmp("bnc_cli_cfg");
    {
        std::ofstream f(tmp.file("run.ini"));
        f << "[model]\ngamma = 3.5\nflux = F\nhorizon = 2.5\n"
          << "[grid]\ncells = 512\n"
          << "[solver]\ndt_max = 5e-4\nsnapshot_stride = 7\n"
          << "[run]\nexperiment = strategy\nout = " << tmp.str() << "\nseed = 99\n"
          << "gammas = 1.5, 2\nthetas = 4\neta = 0.1\ntheta = 16\nt_final = 0.5\n"
          << "amplitude = 2\n";
    }
    const cli::RunConfig cfg = cli::apply_config_file(cli::RunConfig{}, tmp.file("run.ini"));
    CHECK(cfg.model.gamma == 3.5);
    CHECK(cfg.model.flux_variant == FluxVariant::F);
    CHECK(cfg.model.horizon_T == 2.5);
    CHECK(cfg.n_cells == 512);
    CHECK(cfg.solver_cfg.dt_max == 5e-4);
    CHECK(cfg.solver_cfg.snapshot_stride == 7);
    CHECK(cfg.experiment == "strategy");
    CHECK(cfg.output_dir == tmp.str());
    CHECK(cfg.seed == 99);
    CHECK(cfg.gammas == std::vector<double>{1.5, 2.0});
    CHECK(cfg.thetas == std::vector<double>{4.0});
    CHECK(cfg.eta == 0.1);
    CHECK(cfg.theta == 16.0);
    CHECK(cfg.t_final == 0.5);
    CHECK(cfg.amplitude == 2.0);

    /* untouched keys keep their defaults */
    {
        std::ofstream f(tmp.file("sparse.ini"));
        f << "[run]\nseed = 7\n";
    }
    const cli::RunConfig sparse = cli::apply_config_file(cli::RunConfig{}, tmp.file("sparse.ini"));
    CHECK(sparse.seed == 7);
    CHECK(sparse.n_cells == 256);
    CHECK(sparse.model.gamma == 2.0);
    CHECK(sparse.experiment == "checks");

    {
        std::ofstream f(tmp.file("badflux.ini"));
        f << "[model]\nflux = Q\n";
    }
    CHECK_THROWS_AS(cli::apply_config_file(cli::RunConfig{}, tmp.file("badflux.ini")),
                    config::ParseError);
    CHECK_THROWS_AS(cli::apply_config_file(cli::RunConfig{}, tmp.file("missing.ini")),
                    config::ParseError);
}

TEST_CASE("run configuration validation")
{
    cli::RunConfig cfg;
    cfg.n_cells = 4;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg = {};
    cfg.eta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg = {};
    cfg.thetas = {2.0, -1.0};
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());

    cfg.experiment = "florb";
    CHECK_THROWS_AS(cli::run(cfg), InvalidParams);
}

TEST_CASE("steady-states command writes matching table and figure, deterministically")
{
    TempDir tmp("bnc_cli_steady");
    cli::RunConfig cfg;
    cfg.output_dir = tmp.str();
    cfg.gammas = {2.0};
    cfg.thetas = {2.0};
    cfg.n_cells = 128;

    CHECK(cli::cmd_steady_states(cfg) == 0);
    REQUIRE(fs::exists(tmp.file("profiles.csv")));
    REQUIRE(fs::exists(tmp.file("steady_states.svg")));

    const std::string csv_text = slurp(tmp.file("profiles.csv"));
    CHECK(csv_text.rfind("gamma,theta,x,value\n", 0) == 0);
    /* one row per node plus the header */
    CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 1 + 129);
    CHECK(slurp(tmp.file("steady_states.svg")).find("<svg") == 0);

    /* byte-identical on a rerun with the same configuration */
    CHECK(cli::cmd_steady_states(cfg) == 0);
    CHECK(slurp(tmp.file("profiles.csv")) == csv_text);
}

TEST_CASE("strategy command reports a full pass and writes its artifacts")
{
    TempDir tmp("bnc_cli_strategy");
    cli::RunConfig cfg;
    cfg.output_dir = tmp.str();
    cfg.n_cells = 128;
    cfg.theta = 4.0;       /* pinned: skip the sweep */
    cfg.amplitude = 0.5;

    CHECK(cli::cmd_strategy(cfg) == 0);
    for (const char* name : {"trajectory.csv", "controls.csv", "strategy.svg", "stage_report.txt"})
        CHECK(fs::exists(tmp.file(name)));
    const std::string report = slurp(tmp.file("stage_report.txt"));
    CHECK(report.find("ALL STAGES PASSED") != std::string::npos);
    CHECK(report.find("theta = 4") != std::string::npos);
}

TEST_CASE("local-control command converges and writes its artifacts")
{
    TempDir tmp("bnc_cli_local");
    cli::RunConfig cfg;
    cfg.output_dir = tmp.str();
    cfg.n_cells = 64;

    CHECK(cli::cmd_local_control(cfg) == 0);
    for (const char* name :
         {"local_trace.csv", "local_control.csv", "local_state.csv", "local_control.svg"})
        CHECK(fs::exists(tmp.file(name)));
    /* the state table has one row per node */
    const std::string st = slurp(tmp.file("local_state.csv"));
    CHECK(std::count(st.begin(), st.end(), '\n') == 1 + 65);
}
