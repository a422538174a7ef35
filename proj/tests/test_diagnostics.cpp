#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include <bnc/diagnostics.hpp>

using namespace bnc;
namespace diag = bnc::diagnostics;

namespace {

Field sine_field(const Grid& grid, double amplitude, int mode, double t = 0.0)
{
    Field f(grid, 0.0, t);
    for (std::size_t i = 0; i <= grid.n_cells; ++i)
        f[i] = amplitude * std::sin(mode * M_PI * grid.x(i));
    return f;
}

/* direct trapezoid of y^2 exp(s (1-x)); overflows for large s, used as the
 * reference where it does not */
double naive_weighted_sum(const Field& y, const Grid& grid, double s)
{
    const std::size_t N = grid.n_cells;
    const double h = grid.h();
    double acc = 0.0;
    for (std::size_t i = 0; i <= N; ++i) {
        const double wq = (i == 0 || i == N) ? 0.5 * h : h;
        acc += wq * y[i] * y[i] * std::exp(s * (1.0 - grid.x(i)));
    }
    return acc;
}

}   // namespace

TEST_CASE("boundary-weighted norm agrees with a direct sum at moderate weight")
{
    const Grid grid{1024};
    const double theta = 2.0, gamma = 2.0;
    const double s = 0.5 * gamma * pow_abs(theta, gamma - 1.0);   /* = 2 */

    Field y = sine_field(grid, 1.0, 3);
    for (std::size_t i = 0; i <= grid.n_cells; ++i)
        y[i] += 0.2;
    const double ls = diag::log_weighted_l2_sq(y, grid, theta, gamma);
    CHECK_THAT(ls, Catch::Matchers::WithinAbs(std::log(naive_weighted_sum(y, grid, s)), 5e-13));

    /* constant field against the continuum integral (e^s - 1)/s */
    const Field one(grid, 1.0);
    const double w = diag::weighted_l2_A(one, grid, theta, gamma);
    CHECK_THAT(w, Catch::Matchers::WithinRel(std::sqrt((std::exp(2.0) - 1.0) / 2.0), 1e-5));
    CHECK_THAT(w * w, Catch::Matchers::WithinRel(3.194528049465325, 1e-5));
}

TEST_CASE("boundary-weighted norm survives weights that overflow a naive sum")
{
    /* s = (3/2) 64^2 = 6144, so exp(s) is far beyond double range */
    const Grid grid{256};
    const double theta = 64.0, gamma = 3.0;
    const double s = 0.5 * gamma * pow_abs(theta, gamma - 1.0);
    const Field one(grid, 1.0);

    const double ls = diag::log_weighted_l2_sq(one, grid, theta, gamma);
    CHECK(std::isfinite(ls));

    /* factor exp(s) out analytically: log sum = s + log(sum w exp(-s x)) */
    const double h = grid.h();
    double tail = 0.5 * h + 0.5 * h * std::exp(-s);
    for (std::size_t i = 1; i < grid.n_cells; ++i)
        tail += h * std::exp(-s * grid.x(i));
    CHECK_THAT(ls, Catch::Matchers::WithinAbs(s + std::log(tail), 1e-10));
}

TEST_CASE("weighted norm of the zero field is zero, its log -inf")
{
    const Grid grid{64};
    const Field zero(grid, 0.0);
    CHECK(diag::log_weighted_l2_sq(zero, grid, 4.0, 2.5) ==
          -std::numeric_limits<double>::infinity());
    CHECK(diag::weighted_l2_A(zero, grid, 4.0, 2.5) == 0.0);
}

TEST_CASE("(x-1)-moment matches exact polynomial integrals")
{
    const Grid grid{64};
    const double h = grid.h();

    /* y = -1: integral of (x-1)(-1) = 1/2, trapezoid exact on linears */
    const Field minus_one(grid, -1.0);
    CHECK_THAT(diag::moment_x_minus_1(minus_one, grid), Catch::Matchers::WithinAbs(0.5, 1e-14));

    /* y = x-1: integral of (x-1)^2 = 1/3; composite trapezoid adds h^2/6 */
    Field ramp(grid, 0.0);
    for (std::size_t i = 0; i <= grid.n_cells; ++i)
        ramp[i] = grid.x(i) - 1.0;
    CHECK_THAT(diag::moment_x_minus_1(ramp, grid),
               Catch::Matchers::WithinAbs(1.0 / 3.0 + h * h / 6.0, 1e-14));
}

TEST_CASE("smoothing envelope evaluates L1/sqrt(4 pi t)")
{
    /* 0.2 / sqrt(4 pi 0.01) = 1/sqrt(pi) */
    CHECK_THAT(diag::smoothing_envelope(0.2, 0.01),
               Catch::Matchers::WithinRel(0.564189583547756, 1e-12));
}

TEST_CASE("least-squares slope recovers affine data and rejects degenerate input")
{
    const std::vector<double> x{-1.0, 0.5, 2.0, 3.25};
    std::vector<double> y;
    for (double xi : x)
        y.push_back(3.0 - 2.0 * xi);
    CHECK_THAT(diag::lsq_slope(x, y), Catch::Matchers::WithinAbs(-2.0, 1e-12));

    CHECK_THROWS_AS(diag::lsq_slope({1.0}, {2.0}), InvalidParams);
    CHECK_THROWS_AS(diag::lsq_slope({1.0, 2.0}, {1.0}), InvalidParams);
    CHECK_THROWS_AS(diag::lsq_slope({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}), InvalidParams);
}

TEST_CASE("time_to_fraction interpolates the crossing")
{
    Trajectory traj;
    TimeSeries& s = traj.diagnostics["sup_norm"];
    s.push(0.0, 4.0);
    s.push(1.0, 3.0);
    s.push(2.0, 1.0);

    /* half of 4 is reached between t = 1 (3) and t = 2 (1) at t = 1.5 */
    CHECK_THAT(diag::time_to_fraction(traj, 0.5), Catch::Matchers::WithinAbs(1.5, 1e-14));
    /* never drops to a tenth within the recorded window */
    CHECK(std::isnan(diag::time_to_fraction(traj, 0.1)));

    Trajectory flat;
    TimeSeries& f = flat.diagnostics["sup_norm"];
    f.push(0.0, 4.0);
    f.push(1.0, 4.0);
    f.push(2.0, 2.0);
    CHECK(diag::time_to_fraction(flat, 1.0) == 1.0);   /* flat crossing: first hit */

    Trajectory empty;
    CHECK_THROWS_AS(diag::time_to_fraction(empty, 0.5), InvalidParams);
}

TEST_CASE("spacetime flux-mass integral clips windows and adds up")
{
    Trajectory traj;
    TimeSeries& s = traj.diagnostics["lgamma_density"];
    s.push(0.0, 1.0);
    s.push(1.0, 3.0);
    s.push(2.0, 5.0);

    CHECK_THAT(diag::lgamma_spacetime(traj, 0.0, 2.0), Catch::Matchers::WithinAbs(6.0, 1e-13));
    /* interior window: trapezoid of the linear interpolant on [0.5, 1.5] */
    CHECK_THAT(diag::lgamma_spacetime(traj, 0.5, 1.5), Catch::Matchers::WithinAbs(3.0, 1e-13));
    /* additivity across a cut */
    const double a = diag::lgamma_spacetime(traj, 0.0, 0.7);
    const double b = diag::lgamma_spacetime(traj, 0.7, 2.0);
    CHECK_THAT(a + b, Catch::Matchers::WithinAbs(6.0, 1e-12));
    /* empty and inverted windows contribute nothing */
    CHECK(diag::lgamma_spacetime(traj, 3.0, 4.0) == 0.0);
    CHECK(diag::lgamma_spacetime(traj, 1.5, 0.5) == 0.0);

    Trajectory empty;
    CHECK_THROWS_AS(diag::lgamma_spacetime(empty, 0.0, 1.0), InvalidParams);
}

TEST_CASE("comparison check measures the gap and rejects unordered setups")
{
    const Grid grid{8};
    auto snap = [&](double fill, double t) { return Field(grid, fill, t); };

    Trajectory lo, hi;
    lo.snapshots = {snap(0.10, 0.0), snap(0.05, 0.5)};
    hi.snapshots = {snap(0.20, 0.0), snap(0.30, 0.5)};
    const auto rep = diag::comparison_check(lo, hi);
    CHECK(rep.passed);
    CHECK_THAT(rep.value, Catch::Matchers::WithinAbs(0.10, 1e-14));

    /* unordered initial data */
    Trajectory bad = lo;
    bad.snapshots.front()[3] = 0.25;
    CHECK_THROWS_AS(diag::comparison_check(bad, hi), diag::PreconditionNotOrdered);

    /* mismatched snapshot counts */
    Trajectory shorter = lo;
    shorter.snapshots.pop_back();
    CHECK_THROWS_AS(diag::comparison_check(shorter, hi), diag::PreconditionNotOrdered);

    /* diverging snapshot times */
    Trajectory shifted = lo;
    shifted.snapshots.back().time = 0.6;
    CHECK_THROWS_AS(diag::comparison_check(shifted, hi), diag::PreconditionNotOrdered);

    /* unordered interior controls */
    Trajectory clo = lo, chi = hi;
    clo.schedule.u.add(0.0, 1.0);
    chi.schedule.u.add(0.0, 0.5);
    CHECK_THROWS_AS(diag::comparison_check(clo, chi), diag::PreconditionNotOrdered);

    Trajectory empty;
    CHECK_THROWS_AS(diag::comparison_check(empty, hi), InvalidParams);
}

TEST_CASE("sup-norm stays under the L1 smoothing envelope for gamma >= 2")
{
    const Grid grid{128};
    ModelParams p;
    p.gamma = 2.0;
    solver::SolverConfig cfg;
    cfg.diagnostics_stride = 1;
    const Trajectory traj =
        solver::solve(sine_field(grid, 0.5, 1), ControlSchedule{}, p, grid, cfg, 0.5);
    const auto rep = diag::smoothing_bound_check(traj, p, grid);
    CHECK(rep.name == "smoothing_envelope");
    CHECK(rep.passed);
    CHECK(rep.margin >= 0.0);
}

TEST_CASE("decay-rate fit classifies power-law tails for gamma < 2")
{
    const Grid grid{64};
    ModelParams p;
    p.gamma = 1.75;

    auto power_tail = [&](double expnt) {
        Trajectory traj;
        TimeSeries& sup = traj.diagnostics["sup_norm"];
        TimeSeries& l1 = traj.diagnostics["l1_norm"];
        for (int k = 0; k <= 40; ++k) {
            const double t = k / 40.0;
            const double v = k == 0 ? 8.0 : 2.0 * std::pow(t, -expnt);
            sup.push(t, v);
            l1.push(t, 0.5 * v);
        }
        return traj;
    };

    const auto ok = diag::smoothing_bound_check(power_tail(0.5), p, grid);
    CHECK(ok.name == "smoothing_rate_fit");
    CHECK(ok.passed);
    CHECK_THAT(ok.value, Catch::Matchers::WithinAbs(0.5, 0.05));

    const auto steep = diag::smoothing_bound_check(power_tail(1.0), p, grid);
    CHECK_FALSE(steep.passed);

    /* a tail of zeros leaves nothing to fit */
    Trajectory dead;
    TimeSeries& sup = dead.diagnostics["sup_norm"];
    TimeSeries& l1 = dead.diagnostics["l1_norm"];
    for (int k = 0; k <= 10; ++k) {
        sup.push(k / 10.0, k < 2 ? 1.0 : 0.0);
        l1.push(k / 10.0, k < 2 ? 0.5 : 0.0);
    }
    CHECK_THROWS_AS(diag::smoothing_bound_check(dead, p, grid), InvalidParams);

    Trajectory bare;
    CHECK_THROWS_AS(diag::smoothing_bound_check(bare, p, grid), InvalidParams);
}

TEST_CASE("heat benchmark converges at second order")
{
    const auto rep = diag::convergence_order(diag::ConvergenceProblem::HeatAnalytic, 32, 3);
    CHECK(rep.cells == std::vector<std::size_t>{32, 64, 128});
    CHECK(rep.errors.size() == 3);
    CHECK(rep.errors[2] < rep.errors[0]);
    CHECK_THAT(rep.order, Catch::Matchers::WithinAbs(2.0, 0.25));

    CHECK_THROWS_AS(diag::convergence_order(diag::ConvergenceProblem::HeatAnalytic, 32, 2),
                    InvalidParams);
}

TEST_CASE("energy identity closes on a driven heat run")
{
    const Grid grid{128};
    ModelParams p;
    p.gamma = 2.0;   /* irrelevant: the check forces advection off */
    ControlKnots u;
    u.add(0.0, 0.5);
    u.add(0.15, -0.2);
    solver::SolverConfig cfg;
    cfg.dt_max = 5e-5;
    const auto rep =
        diag::energy_identity_check(sine_field(grid, 0.8, 2), u, p, grid, cfg, 0.2);
    CHECK(rep.name == "energy_identity");
    CHECK(rep.passed);
    CHECK(rep.value <= 0.01);
}
