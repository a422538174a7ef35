#ifndef BNC_SOLVER_HPP
#define BNC_SOLVER_HPP

/*
 * IMEX finite-difference scheme: the convective term is advanced explicitly
 * with the Engquist-Osher monotone flux, the diffusion implicitly with a
 * theta-method (backward Euler by default).  Under the advective CFL bound
 * dt <= h / max|f'(y)| and theta_method = 1 the full update is monotone, so
 * the discrete scheme inherits the comparison and maximum principles of the
 * continuous equation.
 *
 * Update from t to t+dt, interior nodes i = 1..N-1 (mu = dt/h^2):
 *
 *   rhs_i = y_i - (dt/h) (F(y_i, y_{i+1}) - F(y_{i-1}, y_i)) + dt u_eff
 *           + (1-theta) mu (y_{i-1} - 2 y_i + y_{i+1})
 *   (I + theta mu A) y^{new} = rhs,   y^{new}_0 = v(t+dt), y^{new}_N = w(t+dt)
 *
 * where A is the 1D Dirichlet Laplacian stencil and u_eff is the exact step
 * average of the interior control, so piecewise drain integrals are
 * preserved across jump knots regardless of step placement.
 */

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pde_core.hpp"

namespace bnc {
namespace solver {

class CflViolation : public Error {
  public:
    using Error::Error;
};

class NonFinite : public Error {
  public:
    using Error::Error;
};

class StepBudgetExceeded : public Error {
  public:
    using Error::Error;
};

struct SolverConfig {
    double dt_max = 1e-3;
    double cfl_safety = 0.5;         /* fraction of the advective CFL bound, in (0,1] */
    double theta_method = 1.0;       /* 1 = backward Euler, 1/2 = Crank-Nicolson */
    double tolerance_newton = 1e-10; /* reserved for a fully implicit variant; unused */
    std::size_t max_steps = 50'000'000;
    std::size_t snapshot_stride = 0; /* 0: keep first/last only */
    std::size_t diagnostics_stride = 1;
    bool include_advection = true;   /* off: linear heat runs for self-checks */

    void validate() const
    {
        if (!(dt_max > 0.0))
            throw InvalidParams("SolverConfig: dt_max must be positive");
        if (!(cfl_safety > 0.0) || cfl_safety > 1.0)
            throw InvalidParams("SolverConfig: cfl_safety must lie in (0,1]");
        if (theta_method < 0.5 || theta_method > 1.0)
            throw InvalidParams("SolverConfig: theta_method must lie in [1/2,1]");
        if (max_steps == 0)
            throw InvalidParams("SolverConfig: max_steps must be >= 1");
    }
};

/* Engquist-Osher interface flux F(a,b) = f^+(a) + f^-(b), specialised to the
 * two flux variants.  Variant E has f' >= 0, so F(a,b) = f(a) (pure upwind);
 * variant F splits at the minimum of the convex flux. */
inline double eo_flux(double a, double b, const ModelParams& p)
{
    if (p.flux_variant == FluxVariant::E)
        return flux(a, p);
    double s = 0.0;
    if (a > 0.0)
        s += pow_abs(a, p.gamma);
    if (b < 0.0)
        s += pow_abs(b, p.gamma);
    return s;
}

/* d/da and d/db of eo_flux; both are nonnegative resp. nonpositive, which is
 * what makes the explicit update monotone under CFL. */
inline double eo_flux_da(double a, const ModelParams& p)
{
    if (p.flux_variant == FluxVariant::E)
        return flux_prime(a, p);
    return a > 0.0 ? flux_prime(a, p) : 0.0;
}

inline double eo_flux_db(double b, const ModelParams& p)
{
    if (p.flux_variant == FluxVariant::E)
        return 0.0;
    return b < 0.0 ? flux_prime(b, p) : 0.0;
}

inline double max_wave_speed(const Field& y, const ModelParams& p)
{
    double m = 0.0;
    for (double v : y.values)
        m = std::max(m, std::abs(flux_prime(v, p)));
    return m;
}

/* Constant-coefficient Thomas factorisation for (I + theta mu A); cached so
 * runs with a stable step size factor once. */
struct TridiagCache {
    double theta_mu = -1.0;
    std::size_t n = 0;
    std::vector<double> cp;   /* modified upper-diagonal */
    std::vector<double> inv;  /* inverse pivots */

    void prepare(double theta_mu_, std::size_t n_interior)
    {
        if (theta_mu_ == theta_mu && n_interior == n)
            return;
        theta_mu = theta_mu_;
        n = n_interior;
        cp.assign(n, 0.0);
        inv.assign(n, 0.0);
        const double a = -theta_mu;        /* lower = upper */
        const double b = 1.0 + 2.0 * theta_mu;
        double piv = b;
        inv[0] = 1.0 / piv;
        cp[0] = a * inv[0];
        for (std::size_t i = 1; i < n; ++i) {
            piv = b - a * cp[i - 1];
            inv[i] = 1.0 / piv;
            cp[i] = a * inv[i];
        }
    }

    /* Solve (I + theta mu A) x = d in place. */
    void solve(std::vector<double>& d) const
    {
        const double a = -theta_mu;
        d[0] *= inv[0];
        for (std::size_t i = 1; i < n; ++i)
            d[i] = (d[i] - a * d[i - 1]) * inv[i];
        for (std::size_t i = n - 1; i-- > 0;)
            d[i] -= cp[i] * d[i + 1];
    }
};

namespace detail {

struct Workspace {
    std::vector<double> fluxes;   /* interface fluxes F_{i+1/2}, i = 0..N-1 */
    std::vector<double> rhs;
    TridiagCache tri;
};

inline void step_into(const Field& y, const ControlSchedule& s, const ModelParams& p,
                      const Grid& grid, const SolverConfig& cfg, double dt,
                      Workspace& ws, Field& out)
{
    const std::size_t N = grid.n_cells;
    const double h = grid.h();
    const double t = y.time;

    if (y.size() != N + 1)
        throw InvalidParams("step: field size does not match grid");
    if (!(dt > 0.0))
        throw InvalidParams("step: dt must be positive");

    if (cfg.include_advection) {
        const double smax = max_wave_speed(y, p);
        if (!std::isfinite(smax))
            throw NonFinite("step: non-finite state at t = " + std::to_string(t));
        if (smax > 0.0 && dt > cfg.cfl_safety * h / smax * (1.0 + 1e-12))
            throw CflViolation("step: dt = " + std::to_string(dt) + " exceeds CFL bound " +
                               std::to_string(cfg.cfl_safety * h / smax) + " at t = " +
                               std::to_string(t));
    }

    const double theta = cfg.theta_method;
    const double mu = dt / (h * h);
    /* exact step average: schedules are piecewise linear with jump knots, and
     * end-of-step sampling would lose a whole dt*u across a jump (the drain
     * integral must survive exactly). */
    const double u_eff = s.u.integral(t, t + dt) / dt;
    const double b0 = s.v.eval(t + dt);
    const double bN = s.w.eval(t + dt);

    ws.rhs.assign(N - 1, 0.0);

    if (cfg.include_advection) {
        ws.fluxes.resize(N);
        for (std::size_t i = 0; i < N; ++i)
            ws.fluxes[i] = eo_flux(y[i], y[i + 1], p);
    }

    const double ex = (1.0 - theta) * mu;
    for (std::size_t i = 1; i < N; ++i) {
        double r = y[i] + dt * u_eff;
        if (cfg.include_advection)
            r -= (dt / h) * (ws.fluxes[i] - ws.fluxes[i - 1]);
        if (ex != 0.0)
            r += ex * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
        ws.rhs[i - 1] = r;
    }
    ws.rhs[0] += theta * mu * b0;
    ws.rhs[N - 2] += theta * mu * bN;

    ws.tri.prepare(theta * mu, N - 1);
    ws.tri.solve(ws.rhs);

    out.values.resize(N + 1);
    out.values[0] = b0;
    out.values[N] = bN;
    for (std::size_t i = 1; i < N; ++i)
        out.values[i] = ws.rhs[i - 1];
    out.time = t + dt;

    for (double vv : out.values)
        if (!std::isfinite(vv))
            throw NonFinite("step: state became non-finite at t = " + std::to_string(out.time));
}

}   // namespace detail

inline Field step(const Field& y, const ControlSchedule& s, const ModelParams& p,
                  const Grid& grid, const SolverConfig& cfg, double dt)
{
    p.validate();
    cfg.validate();
    detail::Workspace ws;
    Field out;
    detail::step_into(y, s, p, grid, cfg, dt, ws, out);
    return out;
}

/* Extra scalar functionals to record along a run, e.g. a weighted norm. */
using ExtraFunctional = std::pair<std::string, std::function<double(const Field&, const Grid&)>>;

/* March from y0 to t_end with adaptive steps dt = min(dt_max, CFL bound,
 * time remaining).  Records sup/L1/L2 norms and the integral of |y|^gamma as
 * named diagnostic series, plus any caller-supplied functionals. */
inline Trajectory solve(const Field& y0, const ControlSchedule& s, const ModelParams& p,
                        const Grid& grid, const SolverConfig& cfg, double t_end,
                        const std::vector<ExtraFunctional>& extras = {})
{
    p.validate();
    cfg.validate();
    if (y0.size() != grid.n_nodes())
        throw InvalidParams("solve: initial field size does not match grid");
    for (double vv : y0.values)
        if (!std::isfinite(vv))
            throw NonFinite("solve: non-finite initial data");
    if (t_end < y0.time)
        throw InvalidParams("solve: t_end precedes the initial time");

    const std::size_t N = grid.n_cells;
    const double h = grid.h();

    Trajectory traj;
    traj.schedule = s;
    traj.snapshots.push_back(y0);

    auto record = [&](const Field& y) {
        double sup = 0.0, l1 = 0.0, l2 = 0.0, lg = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            const double a = std::abs(y[i]);
            const double wq = (i == 0 || i == N) ? 0.5 * h : h;
            sup = std::max(sup, a);
            l1 += wq * a;
            l2 += wq * a * a;
            lg += wq * pow_abs(y[i], p.gamma);
        }
        traj.diagnostics["sup_norm"].push(y.time, sup);
        traj.diagnostics["l1_norm"].push(y.time, l1);
        traj.diagnostics["l2_norm"].push(y.time, std::sqrt(l2));
        traj.diagnostics["lgamma_density"].push(y.time, lg);
        for (const auto& [name, fn] : extras)
            traj.diagnostics[name].push(y.time, fn(y, grid));
    };

    record(y0);
    if (y0.time == t_end)
        return traj;

    detail::Workspace ws;
    Field cur = y0;
    Field next;
    const double span = t_end - y0.time;
    std::size_t steps = 0;

    while (cur.time < t_end) {
        if (steps >= cfg.max_steps)
            throw StepBudgetExceeded("solve: exceeded " + std::to_string(cfg.max_steps) +
                                     " steps at t = " + std::to_string(cur.time));
        double dt = cfg.dt_max;
        if (cfg.include_advection) {
            const double smax = max_wave_speed(cur, p);
            if (smax > 0.0)
                dt = std::min(dt, cfg.cfl_safety * h / smax);
        }
        const double remaining = t_end - cur.time;
        if (dt >= remaining * (1.0 - 1e-12))
            dt = remaining;
        detail::step_into(cur, s, p, grid, cfg, dt, ws, next);
        if (dt == remaining)
            next.time = t_end;
        std::swap(cur, next);
        ++steps;

        const bool last = cur.time >= t_end;
        if (cfg.diagnostics_stride > 0 && (steps % cfg.diagnostics_stride == 0 || last))
            record(cur);
        if (last || (cfg.snapshot_stride > 0 && steps % cfg.snapshot_stride == 0))
            traj.snapshots.push_back(cur);
    }
    return traj;
}

}   // namespace solver
}   // namespace bnc

#endif
