#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <bnc/local_control.hpp>

using namespace bnc;
namespace lc = bnc::local_control;

namespace {

lc::LocalProblem small_problem(double gamma, std::size_t cells, std::size_t steps,
                               double amplitude)
{
    lc::LocalProblem prob;
    prob.grid = Grid{cells};
    prob.params.gamma = gamma;
    prob.params.flux_variant = FluxVariant::E;
    prob.stage_T = 0.25;
    prob.n_steps = steps;
    prob.y_in = Field(prob.grid, 0.0, 0.0);
    for (std::size_t i = 0; i <= cells; ++i)
        prob.y_in[i] = amplitude * std::sin(M_PI * prob.grid.x(i));
    return prob;
}

}   // namespace

TEST_CASE("zero entry state: zero control is already optimal")
{
    const auto prob = small_problem(2.5, 32, 64, 0.0);
    lc::ControlVector zero;
    zero.values.assign(prob.n_steps + 1, 0.0);

    CHECK(lc::objective(zero, prob) == 0.0);
    const auto g = lc::gradient(zero, prob);
    for (double gi : g.values)
        CHECK(std::abs(gi) <= 1e-18);
    CHECK(lc::terminal_l2_of(zero, prob) == 0.0);

    const auto res = lc::optimize(prob);
    CHECK(res.status == lc::OptimizeStatus::Converged);
    CHECK(res.terminal_l2 == 0.0);
}

TEST_CASE("adjoint gradient matches central differences")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    for (double gamma : {1.75, 2.5}) {
        auto prob = small_problem(gamma, 48, 96, 0.1);
        lc::ControlVector v;
        v.values.resize(prob.n_steps + 1);
        for (std::size_t k = 0; k <= prob.n_steps; ++k)
            v[k] = 0.05 * std::sin(2.0 * M_PI * k / prob.n_steps);

        const auto g = lc::gradient(v, prob);
        for (int dir = 0; dir < 5; ++dir) {
            std::vector<double> d(v.size());
            double nrm = 0.0;
            for (double& di : d) {
                di = unif(rng);
                nrm += di * di;
            }
            nrm = std::sqrt(nrm);
            double gd = 0.0;
            for (std::size_t k = 0; k < d.size(); ++k) {
                d[k] /= nrm;
                gd += g[k] * d[k];
            }

            const double eps = 1e-5;
            lc::ControlVector vp = v, vm = v;
            for (std::size_t k = 0; k < d.size(); ++k) {
                vp[k] += eps * d[k];
                vm[k] -= eps * d[k];
            }
            const double fd = (lc::objective(vp, prob) - lc::objective(vm, prob)) / (2.0 * eps);
            CHECK_THAT(gd, Catch::Matchers::WithinRel(fd, 1e-5));
        }
    }
}

TEST_CASE("optimizer drives a small entry state to the terminal target")
{
    auto prob = small_problem(2.5, 64, 256, 0.15);
    REQUIRE(prob.smallness_ok());

    const double entry = lc::terminal_l2_of(
        [&] {
            lc::ControlVector z;
            z.values.assign(prob.n_steps + 1, 0.0);
            return z;
        }(),
        prob);

    lc::OptimizeOptions opt;
    const auto res = lc::optimize(prob, opt);
    CHECK(res.status == lc::OptimizeStatus::Converged);
    CHECK(res.terminal_l2 <= opt.target_terminal_l2);
    CHECK(res.terminal_l2 < entry);   /* the free decay alone is not enough */
    CHECK(res.iterations > 0);
    CHECK_FALSE(res.trace.empty());
    CHECK(res.smallness_ok);

    double vmax = 0.0;
    for (double vk : res.control.values)
        vmax = std::max(vmax, std::abs(vk));
    CHECK(vmax > 0.0);

    /* re-running from the solved control needs no further descent */
    const auto warm = lc::optimize(prob, opt, &res.control);
    CHECK(warm.status == lc::OptimizeStatus::Converged);
    CHECK(warm.terminal_l2 <= opt.target_terminal_l2);
    CHECK(warm.iterations <= res.iterations);
}

TEST_CASE("rollout reproduces the optimizer's step grid and diagnostics")
{
    auto prob = small_problem(2.0, 32, 64, 0.1);
    lc::ControlVector v;
    v.values.assign(prob.n_steps + 1, 0.02);

    const double t0 = 0.75;
    const Trajectory traj = lc::rollout(prob, v, t0);
    CHECK(traj.snapshots.size() == prob.n_steps + 1);
    CHECK(traj.snapshots.front().time == t0);
    CHECK_THAT(traj.snapshots.back().time,
               Catch::Matchers::WithinAbs(t0 + prob.stage_T, 1e-12));
    for (std::size_t i = 0; i < prob.y_in.size(); ++i)
        CHECK(traj.snapshots.front()[i] == prob.y_in[i]);

    /* terminal norm agrees with the objective-side measurement */
    CHECK_THAT(l2_norm(traj.final(), prob.grid),
               Catch::Matchers::WithinAbs(lc::terminal_l2_of(v, prob), 1e-13));

    /* the boundary control is replayed as the v-schedule */
    CHECK_THAT(traj.schedule.v.eval(t0 + 0.1), Catch::Matchers::WithinAbs(0.02, 1e-14));
    CHECK(traj.diagnostics.count("sup_norm") == 1);
    CHECK(traj.diagnostics.at("sup_norm").size() == prob.n_steps + 1);

    /* a sparse stride still keeps both endpoints */
    const Trajectory sparse = lc::rollout(prob, v, t0, 50);
    CHECK(sparse.snapshots.front().time == t0);
    CHECK_THAT(sparse.snapshots.back().time,
               Catch::Matchers::WithinAbs(t0 + prob.stage_T, 1e-12));
    CHECK(sparse.snapshots.size() < traj.snapshots.size());
}

TEST_CASE("problem validation and control sizing")
{
    auto prob = small_problem(2.5, 32, 64, 0.1);

    lc::ControlVector wrong;
    wrong.values.assign(prob.n_steps, 0.0);   /* one knot short */
    CHECK_THROWS_AS(lc::objective(wrong, prob), InvalidParams);
    CHECK_THROWS_AS(lc::gradient(wrong, prob), InvalidParams);

    auto bad = prob;
    bad.stage_T = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
    bad = prob;
    bad.n_steps = 1;
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
    bad = prob;
    bad.alpha = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
    bad = prob;
    bad.theta_method = 0.25;
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
    bad = prob;
    bad.y_in = Field(Grid{16}, 0.0, 0.0);
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
}

TEST_CASE("smallness gate is strict at 1/(2 gamma)")
{
    auto prob = small_problem(2.5, 32, 64, 0.0);
    prob.y_in = Field(prob.grid, 0.2, 0.0);   /* sup = 1/(2 gamma) exactly */
    CHECK_FALSE(prob.smallness_ok());
    prob.y_in = Field(prob.grid, 0.2 - 1e-12, 0.0);
    CHECK(prob.smallness_ok());
}

TEST_CASE("step suggestion respects the advective CFL bound")
{
    const Grid grid{64};
    ModelParams p;
    p.gamma = 2.0;
    p.flux_variant = FluxVariant::E;

    /* cap 4 at gamma 2: speed 8, dt = h/16 < dt_max, so 256 steps */
    CHECK(lc::suggest_steps(0.25, grid, 4.0, p, 1e-3) == 256);
    /* zero cap: dt_max rules */
    CHECK(lc::suggest_steps(0.25, grid, 0.0, p, 1e-3) == 250);
    /* short stages fall back to the floor */
    CHECK(lc::suggest_steps(1e-4, grid, 1.0, p, 1e-3) == 128);
    CHECK(lc::suggest_steps(1e-4, grid, 1.0, p, 1e-3, 64) == 64);
}
