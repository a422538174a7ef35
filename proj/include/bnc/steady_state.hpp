#ifndef BNC_STEADY_STATE_HPP
#define BNC_STEADY_STATE_HPP

/*
 * Steady boundary-layer profiles: the stationary states with y(0) = theta,
 * y(1) = 0 and zero interior control satisfy the first-order equation
 *
 *     y'(x) = |y(x)|^gamma + C
 *
 * for a constant C = y'(1) (the profile solves y'' = (f(y))' once, with the
 * integration constant fixed by the right boundary).  For theta > 0 the
 * admissible constant lies in the bracket
 *
 *     -theta^gamma - theta < C < -theta^gamma,
 *
 * and the profile is nonnegative, decreasing and concave, flat near x = 0
 * with a boundary layer of width ~ theta^(1-gamma) at x = 1.
 *
 * The solver shoots backward from the layer end: psi(s) = y(1-s) satisfies
 * psi' = -(|psi|^gamma + C), psi(0) = 0, and C is bisected until psi(1) =
 * theta.  Backward is the stable direction: the plateau |C|^(1/gamma)
 * attracts, so d psi(1)/dC ~ theta^(1-gamma)/gamma stays well above
 * rounding.  Shooting forward from x = 0 instead amplifies perturbations
 * of C like exp(gamma theta^(gamma-1)); the tuned offset -C - theta^gamma
 * ~ exp(-gamma theta^(gamma-1)) falls below one ulp of theta^gamma already
 * for moderate theta, and the layer then cannot be placed at x = 1 in
 * double precision.
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pde_core.hpp"

namespace bnc {
namespace steady_state {

class BlowUp : public Error {
  public:
    using Error::Error;
};

class BracketFailure : public Error {
  public:
    using Error::Error;
};

struct SteadyStateProfile {
    double theta = 0.0;
    double gamma = 2.0;
    Field samples;             /* nodal values on the requested grid */
    double slope_right = 0.0;  /* y'(1) = C + |y(1)|^gamma */
    double constant_C = 0.0;   /* the bisected integration constant */
};

namespace detail {

/* One adaptive Dormand-Prince(5,4) integration of y' = dir * (|y|^gamma + C)
 * from x0 to x1 (dir = -1 runs the profile equation in the backward variable
 * s = 1 - x).  Optionally clips steps to node boundaries and records nodal
 * values through `sink(node_index, value)`.  Throws BlowUp when |y| leaves
 * the a-priori bound. */
template <typename Sink>
double integrate(double y0, double C, double gamma, double x0, double x1,
                 double theta_scale, Sink&& sink, const Grid* grid = nullptr,
                 std::size_t first_node = 1, double dir = 1.0)
{
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                     a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                     e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                     e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    const double rtol = 1e-10;
    const double atol = 1e-12 * (1.0 + theta_scale);
    const double bound = 10.0 * (theta_scale + pow_abs(C, 1.0 / gamma) + 1.0);

    auto g = [&](double y) { return dir * (pow_abs(y, gamma) + C); };

    double x = x0;
    double y = y0;
    std::size_t node = first_node;
    double hstep = (x1 - x0) * 1e-3;

    while (x < x1) {
        if (std::abs(y) > bound)
            throw BlowUp("shoot: |y| exceeded " + std::to_string(bound) + " at x = " +
                         std::to_string(x) + " (C = " + std::to_string(C) + ")");
        /* Resolution exit: on the attracting side of the plateau root the
         * speed |g| only decays along the trajectory, so the total remaining
         * change is at most |g(y)| * (x1 - x).  Once that bound drops below
         * a fraction of one ulp the tail is constant in double precision and
         * the remaining nodes take the current value. */
        if (dir * y < 0.0 &&
            std::abs(g(y)) * (x1 - x) <
                0.25 * std::numeric_limits<double>::epsilon() * (std::abs(y) + atol)) {
            if (grid != nullptr)
                for (; node <= grid->n_cells; ++node)
                    sink(node, y);
            return y;
        }
        double target = x1;
        if (grid != nullptr && node <= grid->n_cells)
            target = grid->x(node);
        if (hstep > target - x)
            hstep = target - x;
        if (hstep < 1e-15 * (1.0 + std::abs(x)))
            hstep = 1e-15 * (1.0 + std::abs(x));

        const double k1 = g(y);
        const double k2 = g(y + hstep * a21 * k1);
        const double k3 = g(y + hstep * (a31 * k1 + a32 * k2));
        const double k4 = g(y + hstep * (a41 * k1 + a42 * k2 + a43 * k3));
        const double k5 = g(y + hstep * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const double k6 = g(y + hstep * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const double ynew = y + hstep * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const double k7 = g(ynew);
        const double err =
            std::abs(hstep * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
        const double tol = atol + rtol * std::max(std::abs(y), std::abs(ynew));

        /* A trial stage overflowed (large gamma makes the cascade explode as
         * |y|^gamma per stage): the error estimate is meaningless, shrink. */
        if (!std::isfinite(err) || !std::isfinite(ynew)) {
            hstep *= 0.2;
            continue;
        }

        if (err <= tol || hstep <= 1e-14 * (1.0 + std::abs(x))) {
            x += hstep;
            y = ynew;
            if (grid != nullptr && node <= grid->n_cells && x >= grid->x(node) * (1.0 - 1e-15)) {
                sink(node, y);
                ++node;
            }
        }
        const double ratio = err > 0.0 ? std::pow(tol / err, 0.2) : 5.0;
        hstep *= std::clamp(0.9 * ratio, 0.2, 5.0);
    }
    return y;
}

}   // namespace detail

/* Endpoint map of the shooting problem: y(0) = theta, y' = |y|^gamma + C,
 * returns y(1). */
inline double shoot(double theta, double C, double gamma)
{
    if (!(gamma >= 1.0))
        throw InvalidParams("shoot: gamma must be >= 1");
    return detail::integrate(theta, C, gamma, 0.0, 1.0, std::abs(theta), [](std::size_t, double) {});
}

/* Bisect the integration constant on the backward shot until psi(1) = theta,
 * then sample the profile on `grid`.  `tol` is the bisection tolerance on C;
 * the loop also stops once the interval collapses to adjacent doubles, so a
 * tiny tol requests full ulp resolution.  The returned constant is the
 * bracket end whose plateau does not overshoot theta, i.e. slope_right = C
 * sits strictly below -theta^gamma whenever doubles resolve the gap. */
inline SteadyStateProfile solve_steady(double theta, double gamma, const Grid& grid,
                                       double tol = 1e-9)
{
    if (!(theta > 0.0))
        throw InvalidParams("solve_steady: theta must be positive");
    if (!(gamma >= 1.0))
        throw InvalidParams("solve_steady: gamma must be >= 1");
    if (!(tol > 0.0))
        throw InvalidParams("solve_steady: tol must be positive");

    const double tg = pow_abs(theta, gamma);
    double lo = -tg - theta;   /* plateau overshoots theta here */
    double hi = -tg;           /* plateau saturates just below theta here */

    auto left_value = [&](double C) {
        return detail::integrate(0.0, C, gamma, 0.0, 1.0, theta,
                                 [](std::size_t, double) {}, nullptr, 1, -1.0);
    };

    const double f_lo = left_value(lo);
    if (!(f_lo > theta))
        throw BracketFailure("solve_steady: y(0) = " + std::to_string(f_lo) +
                             " at the lower bracket end; expected a value above theta");

    /* psi(1) decreases in C: keep lo on the overshooting side. */
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(lo < mid && mid < hi))
            break;
        (left_value(mid) > theta ? lo : hi) = mid;
    }

    const double C = hi;
    SteadyStateProfile prof;
    prof.theta = theta;
    prof.gamma = gamma;
    prof.constant_C = C;
    prof.samples.values.assign(grid.n_nodes(), 0.0);
    prof.samples.time = 0.0;

    detail::integrate(
        0.0, C, gamma, 0.0, 1.0, theta,
        [&](std::size_t node, double value) { prof.samples.values[grid.n_cells - node] = value; },
        &grid, 1, -1.0);
    prof.slope_right = C;   /* y(1) = 0 by construction */
    return prof;
}

/* Width of the layer measured at a value level: 1 - x*, where x* is the
 * (linearly interpolated) first crossing of the decreasing profile below
 * `level`. */
inline double width_at_level(const SteadyStateProfile& prof, double level)
{
    const std::vector<double>& y = prof.samples.values;
    const std::size_t n = y.size() - 1;
    if (y[0] < level)
        return 1.0;
    for (std::size_t i = 1; i <= n; ++i) {
        if (y[i] < level) {
            const double x0 = static_cast<double>(i - 1) / n;
            const double x1 = static_cast<double>(i) / n;
            const double a = (y[i - 1] - level) / (y[i - 1] - y[i]);
            return 1.0 - (x0 + a * (x1 - x0));
        }
    }
    return 0.0;
}

struct LayerReport {
    bool plateau_ok = false;   /* profile >= a*theta left of the guaranteed threshold */
    double threshold_x = 0.0;  /* 1 - (a/(1-a^gamma)) theta^(1-gamma) */
    double half_width = 0.0;   /* measured width at level theta/2 */
    double min_plateau_value = 0.0;
};

/* Check the guaranteed plateau: y >= a*theta for x <= 1-(a/(1-a^gamma)) *
 * theta^(1-gamma), and measure the half-height layer width. */
inline LayerReport layer_width_check(const SteadyStateProfile& prof, double a)
{
    if (!(a > 0.0 && a < 1.0))
        throw InvalidParams("layer_width_check: a must lie in (0,1)");
    LayerReport rep;
    const double theta = prof.theta, gamma = prof.gamma;
    rep.threshold_x = 1.0 - a / (1.0 - pow_abs(a, gamma)) * pow_abs(theta, 1.0 - gamma);
    rep.half_width = width_at_level(prof, 0.5 * theta);
    const std::vector<double>& y = prof.samples.values;
    const std::size_t n = y.size() - 1;
    double mn = y[0];
    for (std::size_t i = 0; i <= n; ++i) {
        if (static_cast<double>(i) / n > rep.threshold_x)
            break;
        mn = std::min(mn, y[i]);
    }
    rep.min_plateau_value = mn;
    rep.plateau_ok = mn >= a * theta;
    return rep;
}

/* Layer constant for the residue construction: the smallest Ct such that
 * the profile stays above theta - eta for x <= 1 - Ct * theta^(-alpha),
 * maximised over the supplied theta values. */
inline double measure_layer_constant(double gamma, double alpha, double eta,
                                     const std::vector<double>& thetas, const Grid& grid)
{
    if (thetas.empty())
        throw InvalidParams("measure_layer_constant: need at least one theta");
    double ct = 0.0;
    for (double theta : thetas) {
        const SteadyStateProfile prof = solve_steady(theta, gamma, grid);
        const double w = width_at_level(prof, theta - eta);
        ct = std::max(ct, w * pow_abs(theta, alpha));
    }
    return ct;
}

/* Re-integrate the profile ODE across each cell and report the largest
 * mismatch against the stored samples; a cheap self-consistency residual. */
inline double ode_residual(const SteadyStateProfile& prof, const Grid& grid)
{
    const std::vector<double>& y = prof.samples.values;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < y.size(); ++i) {
        const double pred =
            detail::integrate(y[i], prof.constant_C, prof.gamma, grid.x(i), grid.x(i + 1),
                              prof.theta, [](std::size_t, double) {});
        worst = std::max(worst, std::abs(pred - y[i + 1]));
    }
    return worst;
}

/* Closed forms used as independent oracles.  gamma = 2: the profile is
 * th_hat * tanh(th_hat (1-x)) where th_hat tanh(th_hat) = theta; gamma = 1:
 * theta (e - e^x)/(e - 1). */
inline double gamma2_theta_hat(double theta)
{
    if (!(theta > 0.0))
        throw InvalidParams("gamma2_theta_hat: theta must be positive");
    double lo = std::sqrt(theta);            /* t tanh t < t^2 and < t */
    double hi = theta + 1.0;
    while (lo * std::tanh(lo) > theta)
        lo *= 0.5;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid * std::tanh(mid) < theta ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double gamma2_profile(double theta, double x)
{
    const double th = gamma2_theta_hat(theta);
    return th * std::tanh(th * (1.0 - x));
}

inline double gamma1_profile(double theta, double x)
{
    const double e = std::exp(1.0);
    return theta * (e - std::exp(x)) / (e - 1.0);
}

}   // namespace steady_state
}   // namespace bnc

#endif
