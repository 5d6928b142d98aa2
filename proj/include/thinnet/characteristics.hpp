#pragma once

// Edge solvers for  w_t + v w_x = -(v_x) w + Psi(w,x,t)  on [0,L]x[0,T] with zero
// initial state and data on the inflow side: characteristics with Picard
// iteration, and an explicit upwind finite-volume scheme for the equivalent
// conservative form  w_t + (v w)_x = Psi.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace thinnet {

struct EdgeGrid {
    double L = 1.0;
    double T = 1.0;
    int nx = 64;
    int nt = 64;

    double dx() const { return L / nx; }
    double dt() const { return T / nt; }
    double x(int j) const { return L * j / nx; }
    double t(int n) const { return T * n / nt; }

    void check() const {
        if (nx < 4 || nt < 4) throw ConfigError("edge grid needs Nx >= 4 and Nt >= 4");
        if (!(L > 0.0) || !(T > 0.0)) throw ConfigError("edge grid needs positive L and T");
    }
};

// Node values w(x_j, t_n), j = 0..nx, n = 0..nt, stored row-major in t.
struct EdgeSolution {
    EdgeGrid grid;
    std::vector<double> w;
    bool converged = true;
    int iterations = 0;
    std::vector<double> residuals;

    EdgeSolution() = default;
    explicit EdgeSolution(const EdgeGrid& g) : grid(g), w(static_cast<std::size_t>(g.nx + 1) * (g.nt + 1), 0.0) {}

    double& at(int j, int n) { return w[static_cast<std::size_t>(n) * (grid.nx + 1) + j]; }
    double at(int j, int n) const { return w[static_cast<std::size_t>(n) * (grid.nx + 1) + j]; }
    const double* level(int n) const { return w.data() + static_cast<std::size_t>(n) * (grid.nx + 1); }
    double* level(int n) { return w.data() + static_cast<std::size_t>(n) * (grid.nx + 1); }

    // Bilinear read clamped to the rectangle; zero before t = 0.
    double sample(double x, double t) const {
        if (t < 0.0) return 0.0;
        const double ut = std::min(t / grid.dt(), static_cast<double>(grid.nt));
        int n = std::min(static_cast<int>(ut), grid.nt - 1);
        const double ft = ut - n;
        const double a = linear_interp(level(n), grid.nx, grid.dx(), x);
        const double b = linear_interp(level(n + 1), grid.nx, grid.dx(), x);
        return (1.0 - ft) * a + ft * b;
    }

    TimeSeries trace(int j) const {
        std::vector<double> v(grid.nt + 1);
        for (int n = 0; n <= grid.nt; ++n) v[n] = at(j, n);
        return TimeSeries(grid.dt(), std::move(v));
    }
    TimeSeries trace_start() const { return trace(0); }
    TimeSeries trace_end() const { return trace(grid.nx); }

    double max_abs() const {
        double m = 0.0;
        for (double v : w) m = std::max(m, std::abs(v));
        return m;
    }

    void write_csv(std::ostream& os) const {
        os << "x,t,w\n";
        for (int n = 0; n <= grid.nt; ++n)
            for (int j = 0; j <= grid.nx; ++j) os << fmt17(grid.x(j)) << ',' << fmt17(grid.t(n)) << ',' << fmt17(at(j, n)) << '\n';
    }
};

inline double max_abs_diff(const EdgeSolution& a, const EdgeSolution& b) {
    if (a.w.size() != b.w.size()) throw ConfigError("solutions live on different grids");
    double m = 0.0;
    for (std::size_t i = 0; i < a.w.size(); ++i) m = std::max(m, std::abs(a.w[i] - b.w[i]));
    return m;
}

enum class EntrySide { initial_line, inflow_boundary };

struct CharacteristicCurve {
    std::vector<double> x;    // sample positions, from the end point backward
    std::vector<double> tau;  // matching times
    double t0 = 0.0;          // foot time
    double x0 = 0.0;          // foot position
    EntrySide side = EntrySide::initial_line;
};

// Centered-difference x-derivative of a velocity callable.
template <class V>
auto centered_dx(V v, double step) {
    return [v, step](double x, double t) { return (v(x + step, t) - v(x - step, t)) / (2.0 * step); };
}

namespace detail {

// One RK4 step of dx/dtau = v backward from (x, tau) over length h, together with
// the integral of v_x along the path.
template <class V, class DV>
inline void rk4_back(const V& v, const DV& dv, double x, double tau, double h, int sgn, double& X, double& I) {
    auto vel = [&](double xx, double tt) {
        const double val = v(xx, tt);
        if (val * sgn <= 0.0) throw SignChangeError("velocity changes sign along a characteristic");
        return val;
    };
    const double k1 = vel(x, tau);
    const double k2 = vel(x - 0.5 * h * k1, tau - 0.5 * h);
    const double k3 = vel(x - 0.5 * h * k2, tau - 0.5 * h);
    const double k4 = vel(x - h * k3, tau - h);
    const double j1 = dv(x, tau);
    const double j2 = dv(x - 0.5 * h * k1, tau - 0.5 * h);
    const double j3 = dv(x - 0.5 * h * k2, tau - 0.5 * h);
    const double j4 = dv(x - h * k3, tau - h);
    X = x - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    I = h / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
}

// Where the backward path from (x_j, t_n) sits one time step earlier.
struct Foot {
    double X = 0.0;      // position at t_n - theta*dt
    double E = 1.0;      // damping factor exp(-int v_x)
    double theta = 1.0;  // fraction of the step before hitting the inflow boundary
    bool boundary = false;
};

template <class V, class DV>
inline Foot foot_of(const V& v, const DV& dv, double x, double tn, double dt, double L, int sgn) {
    Foot f;
    double X, I;
    rk4_back(v, dv, x, tn, dt, sgn, X, I);
    const double xb = sgn > 0 ? 0.0 : L;
    const bool outside = sgn > 0 ? X < 0.0 : X > L;
    if (!outside) {
        f.X = std::clamp(X, 0.0, L);
        f.E = std::exp(-I);
        return f;
    }
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        rk4_back(v, dv, x, tn, mid * dt, sgn, X, I);
        const bool out = sgn > 0 ? X < 0.0 : X > L;
        (out ? hi : lo) = mid;
    }
    f.theta = 0.5 * (lo + hi);
    rk4_back(v, dv, x, tn, f.theta * dt, sgn, X, I);
    f.X = xb;
    f.E = std::exp(-I);
    f.boundary = true;
    return f;
}

}  // namespace detail

// Backward characteristic from (x_end, t_end), traced with RK4 steps of grid.dt()
// until it reaches t = 0 or the inflow boundary.
template <class V>
CharacteristicCurve trace_characteristic(V v, double x_end, double t_end, const EdgeGrid& grid) {
    const double v0 = v(x_end, t_end);
    if (v0 == 0.0) throw SignChangeError("velocity vanishes at the end point");
    const int sgn = v0 > 0.0 ? 1 : -1;
    auto zero = [](double, double) { return 0.0; };
    CharacteristicCurve c;
    double x = x_end, tau = t_end;
    c.x.push_back(x);
    c.tau.push_back(tau);
    const double dt = grid.dt();
    while (tau > 0.0) {
        const double h = std::min(dt, tau);
        detail::Foot f = detail::foot_of(v, zero, x, tau, h, grid.L, sgn);
        tau -= f.theta * h;
        x = f.X;
        if (f.boundary || std::abs(tau) < 1e-14 * std::max(1.0, t_end)) tau = std::max(tau, 0.0);
        c.x.push_back(x);
        c.tau.push_back(tau);
        if (f.boundary) {
            c.side = EntrySide::inflow_boundary;
            break;
        }
    }
    c.x0 = c.x.back();
    c.t0 = c.tau.back();
    if (c.side == EntrySide::initial_line) {
        const double xb = sgn > 0 ? 0.0 : grid.L;
        if (std::abs(c.x0 - xb) < 1e-12 * std::max(1.0, grid.L)) c.side = EntrySide::inflow_boundary;
    }
    return c;
}

enum class PicardSchedule { marching, global };

struct MocOptions {
    double tol = 1e-10;
    int max_iter = 60;
    PicardSchedule schedule = PicardSchedule::marching;
};

// Characteristic solver.  v(x,t), dvdx(x,t), psi(w,x,t), q(t) are callables.
template <class V, class DV, class Psi, class Q>
EdgeSolution solve_edge_moc(V v, DV dvdx, Psi psi, Q q, const EdgeGrid& grid, const MocOptions& opt = {}) {
    grid.check();
    const double v0 = v(0.5 * grid.L, 0.0);
    if (v0 == 0.0) throw SignChangeError("velocity vanishes on the edge");
    const int sgn = v0 > 0.0 ? 1 : -1;
    const int nx = grid.nx, nt = grid.nt;
    const double dt = grid.dt(), dx = grid.dx(), L = grid.L;
    const int jin = sgn > 0 ? 0 : nx;
    const double xin = sgn > 0 ? 0.0 : L;

    EdgeSolution sol(grid);
    if (opt.schedule == PicardSchedule::marching) {
        std::vector<double> base(nx + 1), coef(nx + 1), cur(nx + 1);
        int worst_iter = 0;
        for (int n = 1; n <= nt; ++n) {
            const double tn = grid.t(n);
            const double* prev = sol.level(n - 1);
            double* now = sol.level(n);
            for (int j = 0; j <= nx; ++j) {
                if (j == jin) {
                    base[j] = q(tn);
                    coef[j] = 0.0;
                    continue;
                }
                const detail::Foot f = detail::foot_of(v, dvdx, grid.x(j), tn, dt, L, sgn);
                const double h = f.theta * dt;
                if (f.boundary) {
                    const double ts = tn - h;
                    const double qs = q(ts);
                    base[j] = f.E * qs + 0.5 * h * f.E * psi(qs, xin, ts);
                } else {
                    const double wp = cubic_interp(prev, nx, dx, f.X);
                    base[j] = f.E * wp + 0.5 * h * f.E * psi(wp, f.X, tn - dt);
                }
                coef[j] = 0.5 * h;
            }
            for (int j = 0; j <= nx; ++j) cur[j] = base[j];
            int it = 0;
            for (;; ++it) {
                double res = 0.0;
                for (int j = 0; j <= nx; ++j) {
                    if (coef[j] == 0.0) continue;
                    const double nv = base[j] + coef[j] * psi(cur[j], grid.x(j), tn);
                    res = std::max(res, std::abs(nv - cur[j]));
                    cur[j] = nv;
                }
                if (res <= opt.tol) break;
                if (it + 1 >= opt.max_iter) {
                    sol.converged = false;
                    throw NumericalError("Picard iteration did not converge at t = " + fmt17(tn), res);
                }
            }
            worst_iter = std::max(worst_iter, it + 1);
            for (int j = 0; j <= nx; ++j) now[j] = cur[j];
        }
        sol.iterations = worst_iter;
        return sol;
    }

    // Global schedule: every sweep evaluates Psi on the previous iterate only.
    std::vector<detail::Foot> feet(static_cast<std::size_t>(nt) * (nx + 1));
    for (int n = 1; n <= nt; ++n)
        for (int j = 0; j <= nx; ++j)
            if (j != jin) feet[static_cast<std::size_t>(n - 1) * (nx + 1) + j] = detail::foot_of(v, dvdx, grid.x(j), grid.t(n), dt, L, sgn);
    EdgeSolution old(grid);
    for (int k = 0; k < opt.max_iter; ++k) {
        for (int n = 1; n <= nt; ++n) {
            const double tn = grid.t(n);
            const double* prev_new = sol.level(n - 1);
            const double* prev_old = old.level(n - 1);
            const double* now_old = old.level(n);
            double* now = sol.level(n);
            for (int j = 0; j <= nx; ++j) {
                if (j == jin) {
                    now[j] = q(tn);
                    continue;
                }
                const detail::Foot& f = feet[static_cast<std::size_t>(n - 1) * (nx + 1) + j];
                const double h = f.theta * dt;
                double val;
                if (f.boundary) {
                    const double ts = tn - h;
                    const double qs = q(ts);
                    val = f.E * qs + 0.5 * h * f.E * psi(qs, xin, ts);
                } else {
                    val = f.E * cubic_interp(prev_new, nx, dx, f.X) + 0.5 * h * f.E * psi(linear_interp(prev_old, nx, dx, f.X), f.X, tn - dt);
                }
                now[j] = val + 0.5 * h * psi(now_old[j], grid.x(j), tn);
            }
        }
        const double res = max_abs_diff(sol, old);
        sol.residuals.push_back(res);
        sol.iterations = k + 1;
        if (res <= opt.tol) return sol;
        old.w = sol.w;
    }
    sol.converged = false;
    throw NumericalError("Picard iteration did not converge", sol.residuals.back());
}

// Same, with v_x from centered differences of v.
template <class V, class Psi, class Q>
EdgeSolution solve_edge_moc(V v, Psi psi, Q q, const EdgeGrid& grid, const MocOptions& opt = {}) {
    return solve_edge_moc(v, centered_dx(v, 1e-6 * std::max(1.0, grid.L)), psi, q, grid, opt);
}

// Explicit first-order upwind scheme for w_t + (v w)_x = psi(w,x,t).  Cell averages
// are mapped to nodes by averaging neighbours; the inflow node carries the data.
template <class V, class Psi, class Q>
EdgeSolution solve_edge_fv(V v, Psi psi, Q q, const EdgeGrid& grid) {
    grid.check();
    const int nx = grid.nx, nt = grid.nt;
    const double dt = grid.dt(), dx = grid.dx();
    const double v0 = v(0.5 * grid.L, 0.0);
    if (v0 == 0.0) throw SignChangeError("velocity vanishes on the edge");
    const int sgn = v0 > 0.0 ? 1 : -1;

    std::vector<double> c(nx, 0.0), cn(nx), a(nx + 1), F(nx + 1);
    EdgeSolution sol(grid);
    auto to_nodes = [&](int n) {
        double* w = sol.level(n);
        const double tn = grid.t(n);
        for (int j = 1; j < nx; ++j) w[j] = 0.5 * (c[j - 1] + c[j]);
        if (sgn > 0) {
            w[0] = q(tn);
            w[nx] = 1.5 * c[nx - 1] - 0.5 * c[nx - 2];
        } else {
            w[nx] = q(tn);
            w[0] = 1.5 * c[0] - 0.5 * c[1];
        }
    };
    for (int n = 0; n < nt; ++n) {
        const double tn = grid.t(n);
        for (int f = 0; f <= nx; ++f) {
            a[f] = v(grid.x(f), tn);
            if (a[f] * sgn <= 0.0) throw SignChangeError("velocity changes sign on the edge");
            if (std::abs(a[f]) * dt / dx > 0.95 + 1e-12) throw ConfigError("CFL number exceeds 0.95 in the finite-volume scheme");
        }
        const double qn = q(tn);
        for (int f = 1; f < nx; ++f) F[f] = a[f] > 0.0 ? a[f] * c[f - 1] : a[f] * c[f];
        F[0] = a[0] > 0.0 ? a[0] * qn : a[0] * c[0];
        F[nx] = a[nx] > 0.0 ? a[nx] * c[nx - 1] : a[nx] * qn;
        for (int i = 0; i < nx; ++i) cn[i] = c[i] - dt / dx * (F[i + 1] - F[i]) + dt * psi(c[i], (i + 0.5) * dx, tn);
        c.swap(cn);
        to_nodes(n + 1);
    }
    return sol;
}

}  // namespace thinnet
