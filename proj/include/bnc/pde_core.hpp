#ifndef BNC_PDE_CORE_HPP
#define BNC_PDE_CORE_HPP

/*
 * Shared vocabulary for the viscous conservation law
 *
 *     y_t + (f(y))_x - y_xx = u(t)   on (0,1),
 *
 * with Dirichlet boundary controls y(t,0) = v(t), y(t,1) = w(t) and a
 * space-uniform interior control u(t).  Two flux variants are supported:
 *
 *     E : f(y) = sign(y) |y|^gamma   (odd, nondecreasing)
 *     F : f(y) = |y|^gamma           (even, convex)
 *
 * The viscosity is fixed to 1; gamma > 1.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bnc {

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidParams : public Error {
  public:
    using Error::Error;
};

enum class FluxVariant { E, F };

inline std::string to_string(FluxVariant v)
{
    return v == FluxVariant::E ? "E" : "F";
}

struct ModelParams {
    double gamma = 2.0;
    FluxVariant flux_variant = FluxVariant::E;
    double viscosity = 1.0;   /* kept explicit, but the solver assumes 1 */
    double horizon_T = 1.0;

    void validate() const
    {
        if (!(gamma > 1.0))
            throw InvalidParams("ModelParams: gamma must be > 1, got " + std::to_string(gamma));
        if (viscosity != 1.0)
            throw InvalidParams("ModelParams: viscosity is fixed to 1");
        if (!(horizon_T > 0.0))
            throw InvalidParams("ModelParams: horizon_T must be positive");
        if (!std::isfinite(gamma) || !std::isfinite(horizon_T))
            throw InvalidParams("ModelParams: non-finite parameter");
    }
};

/* Uniform grid on [0,1] with n_cells cells, i.e. n_cells+1 nodes.  Node
 * coordinates are computed as i/n so that x(0) = 0 and x(n) = 1 exactly. */
struct Grid {
    std::size_t n_cells = 0;

    Grid() = default;
    explicit Grid(std::size_t n) : n_cells(n)
    {
        if (n_cells < 8)
            throw InvalidParams("Grid: need at least 8 cells, got " + std::to_string(n_cells));
    }

    std::size_t n_nodes() const { return n_cells + 1; }
    double h() const { return 1.0 / static_cast<double>(n_cells); }
    double x(std::size_t i) const
    {
        return static_cast<double>(i) / static_cast<double>(n_cells);
    }
};

/* Nodal values of the state at one instant. */
struct Field {
    std::vector<double> values;
    double time = 0.0;

    Field() = default;
    Field(const Grid& grid, double fill, double t = 0.0)
        : values(grid.n_nodes(), fill), time(t)
    {
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double sup_norm() const
    {
        double m = 0.0;
        for (double v : values)
            m = std::max(m, std::abs(v));
        return m;
    }
};

/* Piecewise-linear control signal: knots (t_i, value_i) with nondecreasing
 * t_i.  Between knots the value is interpolated linearly, outside the knot
 * range it is extrapolated as a constant.  Duplicated knot times encode jump
 * discontinuities; evaluation at the jump time returns the later knot
 * (right-continuous). */
struct ControlKnots {
    std::vector<std::pair<double, double>> knots;

    bool empty() const { return knots.empty(); }

    void add(double t, double value)
    {
        if (!knots.empty() && t < knots.back().first)
            throw InvalidParams("ControlKnots: knot times must be nondecreasing");
        knots.emplace_back(t, value);
    }

    double eval(double t) const
    {
        if (knots.empty())
            return 0.0;
        if (t <= knots.front().first)
            return knots.front().second;
        if (t >= knots.back().first)
            return knots.back().second;
        /* first knot with time > t; its predecessor anchors the segment */
        auto it = std::upper_bound(
            knots.begin(), knots.end(), t,
            [](double s, const std::pair<double, double>& k) { return s < k.first; });
        auto lo = it - 1;
        const double t0 = lo->first, t1 = it->first;
        if (t1 == t0)
            return it->second;
        const double a = (t - t0) / (t1 - t0);
        return lo->second + a * (it->second - lo->second);
    }

    /* Exact integral of the piecewise-linear signal over [t0, t1], with the
     * constant extrapolation outside the knot range. */
    double integral(double t0, double t1) const
    {
        if (t1 < t0)
            return -integral(t1, t0);
        if (knots.empty())
            return 0.0;
        double acc = 0.0;
        /* break [t0,t1] at every knot time falling inside */
        std::vector<double> cuts{t0};
        for (const auto& k : knots)
            if (k.first > t0 && k.first < t1)
                cuts.push_back(k.first);
        cuts.push_back(t1);
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double a = cuts[j], b = cuts[j + 1];
            /* eval at segment midpoint is exact for an affine piece */
            acc += (b - a) * eval(0.5 * (a + b));
        }
        return acc;
    }
};

struct ControlSchedule {
    ControlKnots u;   /* interior control, uniform in space */
    ControlKnots v;   /* left boundary value y(t,0) */
    ControlKnots w;   /* right boundary value y(t,1) */
};

struct ControlValues {
    double u = 0.0;
    double v = 0.0;
    double w = 0.0;
};

inline ControlValues eval_control(const ControlSchedule& s, double t)
{
    return {s.u.eval(t), s.v.eval(t), s.w.eval(t)};
}

/* |a|^p with fast paths for the exponents that dominate the experiment
 * sweeps; falls back to std::pow. */
inline double pow_abs(double a, double p)
{
    const double z = std::abs(a);
    if (p == 1.0) return z;
    if (p == 2.0) return z * z;
    if (p == 3.0) return z * z * z;
    if (p == 4.0) { const double q = z * z; return q * q; }
    if (p == 5.0) { const double q = z * z; return q * q * z; }
    if (p == 0.5) return std::sqrt(z);
    if (p == 1.5) return z * std::sqrt(z);
    if (p == 2.5) return z * z * std::sqrt(z);
    if (p == 3.5) return z * z * z * std::sqrt(z);
    if (z == 0.0) return 0.0;
    return std::pow(z, p);
}

inline double sgn(double y) { return (y > 0.0) - (y < 0.0); }

/* Conservative flux f(y). */
inline double flux(double y, const ModelParams& p)
{
    const double m = pow_abs(y, p.gamma);
    return p.flux_variant == FluxVariant::E ? sgn(y) * m : m;
}

/* f'(y).  Variant E: gamma |y|^(gamma-1) >= 0; variant F: odd. */
inline double flux_prime(double y, const ModelParams& p)
{
    const double m = p.gamma * pow_abs(y, p.gamma - 1.0);
    return p.flux_variant == FluxVariant::E ? m : sgn(y) * m;
}

/* Trapezoid quadrature of the nodal values over [0,1]. */
inline double trapz(const Field& y, const Grid& grid)
{
    const std::size_t N = grid.n_cells;
    double acc = 0.5 * (y[0] + y[N]);
    for (std::size_t i = 1; i < N; ++i)
        acc += y[i];
    return acc * grid.h();
}

inline double l1_norm(const Field& y, const Grid& grid)
{
    const std::size_t N = grid.n_cells;
    double acc = 0.5 * (std::abs(y[0]) + std::abs(y[N]));
    for (std::size_t i = 1; i < N; ++i)
        acc += std::abs(y[i]);
    return acc * grid.h();
}

inline double l2_norm(const Field& y, const Grid& grid)
{
    const std::size_t N = grid.n_cells;
    double acc = 0.5 * (y[0] * y[0] + y[N] * y[N]);
    for (std::size_t i = 1; i < N; ++i)
        acc += y[i] * y[i];
    return std::sqrt(acc * grid.h());
}

/* Sum of ((y_{i+1}-y_i)/h)^2 h, the discrete H1 seminorm squared. */
inline double h1_seminorm_sq(const Field& y, const Grid& grid)
{
    const std::size_t N = grid.n_cells;
    const double h = grid.h();
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double d = (y[i + 1] - y[i]) / h;
        acc += d * d;
    }
    return acc * h;
}

/* Time series of a named scalar functional recorded along a run. */
struct TimeSeries {
    std::vector<double> times;
    std::vector<double> values;

    void push(double t, double v)
    {
        times.push_back(t);
        values.push_back(v);
    }
    std::size_t size() const { return times.size(); }
};

struct Trajectory {
    std::vector<Field> snapshots;
    ControlSchedule schedule;
    std::map<std::string, TimeSeries> diagnostics;

    const Field& initial() const { return snapshots.front(); }
    const Field& final() const { return snapshots.back(); }

    /* Concatenate a continuation run; its first snapshot must coincide with
     * our last one (same instant, same nodal values). */
    void append(const Trajectory& next, double time_tol = 1e-9)
    {
        if (snapshots.empty()) {
            *this = next;
            return;
        }
        if (next.snapshots.empty())
            return;
        const Field& a = snapshots.back();
        const Field& b = next.snapshots.front();
        if (std::abs(a.time - b.time) > time_tol || a.size() != b.size())
            throw Error("Trajectory::append: runs are not contiguous");
        snapshots.insert(snapshots.end(), next.snapshots.begin() + 1, next.snapshots.end());
        for (const auto& [name, series] : next.diagnostics) {
            TimeSeries& mine = diagnostics[name];
            for (std::size_t k = 0; k < series.size(); ++k) {
                if (!mine.times.empty() && series.times[k] <= mine.times.back())
                    continue;
                mine.push(series.times[k], series.values[k]);
            }
        }
    }
};

}   // namespace bnc

#endif
