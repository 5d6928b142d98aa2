#pragma once

// Cross-section Neumann problems for u1 and the boundary term they feed into
// the corrector source.

#include <Eigen/Sparse>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "graph_limit.hpp"
#include "network.hpp"
#include "numerics.hpp"
#include "projected_cg.hpp"

namespace thinnet {

struct CellInputs {
    int edge = 0;
    double y = 0.0, t = 0.0;
    double w0 = 0.0, w0_y = 0.0, w0_t = 0.0;
};

enum class CellMethod { cg, direct };

struct CellOptions {
    int nr = 64;           // radial cells (3D) or interval cells (2D)
    int ntheta = 64;       // angular cells (3D)
    double cg_tol = 1e-10;
    int cg_max_iter = 20000;
    double compat_tol = 1e-8;  // relative to the size of the data
    // Replace w0_t + (v w0)' by -phi-hat(w0); the right side is then consistent by construction.
    bool use_limit_identity = false;
    CellMethod method = CellMethod::cg;
};

// Disk grid in 3D mode: cell (i, k) at r_i = (i + 1/2) dr, theta_k = (k + 1/2) dtheta.
// Interval grid in 2D mode: cell i at -h + (i + 1/2) dr, ntheta = 1.
struct CellGrid {
    int dim = 3;
    double h = 1.0;
    int nr = 64, nth = 64;

    double dr() const { return (dim == 2 ? 2.0 * h : h) / nr; }
    double dth() const { return 2.0 * M_PI / nth; }
    int size() const { return nr * nth; }
    int index(int i, int k) const { return i * nth + k; }
    double r(int i) const { return (i + 0.5) * dr(); }
    double theta(int k) const { return (k + 0.5) * dth(); }
    double area(int i) const { return dim == 2 ? dr() : r(i) * dr() * dth(); }
    double total_area() const { return dim == 2 ? 2.0 * h : M_PI * h * h; }
    // boundary points: nth points on the circle, or the two interval ends (k = 0 right, k = 1 left)
    int boundary_count() const { return dim == 2 ? 2 : nth; }
    double boundary_length(int) const { return dim == 2 ? 1.0 : h * dth(); }
    void boundary_point(int k, double& x2, double& x3, double& nx2, double& nx3) const {
        if (dim == 2) {
            x2 = k == 0 ? h : -h;
            nx2 = k == 0 ? 1.0 : -1.0;
            x3 = nx3 = 0.0;
            return;
        }
        nx2 = std::cos(theta(k));
        nx3 = std::sin(theta(k));
        x2 = h * nx2;
        x3 = h * nx3;
    }
    void center(int c, double& x2, double& x3) const {
        if (dim == 2) {
            x2 = -h + (c + 0.5) * dr();
            x3 = 0.0;
            return;
        }
        const int i = c / nth, k = c % nth;
        x2 = r(i) * std::cos(theta(k));
        x3 = r(i) * std::sin(theta(k));
    }
};

struct CellSolution {
    CellGrid grid;
    std::vector<double> u;         // cell values, zero area-weighted mean
    std::vector<double> boundary;  // extrapolated boundary values, boundary_count() entries
    double mean = 0.0;
    double residual = 0.0;  // integral of the right side minus boundary integral of the Neumann data
    int iterations = 0;

    double max_abs() const {
        double m = 0.0;
        for (double x : u) m = std::max(m, std::abs(x));
        return m;
    }

    double at(int i, int k = 0) const { return u[grid.index(i, k)]; }

    void write_csv(std::ostream& os) const {
        os << "x2,x3,u1\n";
        for (int c = 0; c < grid.size(); ++c) {
            double a, b;
            grid.center(c, a, b);
            os << fmt17(a) << ',' << fmt17(b) << ',' << fmt17(u[c]) << '\n';
        }
    }
};

namespace detail {

// Right side f at cell centers and Neumann data g at boundary points.
struct CellData {
    std::vector<double> f, g;
};

inline CellData cell_data(const Network& net, const CellInputs& in, const CellGrid& G, bool identity) {
    const int e = in.edge;
    const auto& vel = net.velocity[e];
    Vars x;
    x.y = in.y;
    x.t = in.t;
    double base;
    if (identity) base = -averaged_phi(net, e, in.w0, in.y, in.t);
    else base = in.w0_t + vel.dv1_dy(x) * in.w0 + vel.v1(x) * in.w0_y;
    CellData d;
    d.f.resize(G.size());
    const bool has_vbar = !vel.vbar.empty();
    for (int c = 0; c < G.size(); ++c) {
        double a, b;
        G.center(c, a, b);
        x.x = {0.0, a, b};
        d.f[c] = base + (has_vbar ? in.w0 * vel.div_vbar(x) : 0.0);
    }
    d.g.resize(G.boundary_count());
    for (int k = 0; k < G.boundary_count(); ++k) {
        double a, b, na, nb;
        G.boundary_point(k, a, b, na, nb);
        x.x = {0.0, a, b};
        double vn = 0.0;
        if (has_vbar) {
            vn += vel.vbar[0](x) * na;
            if (vel.vbar.size() > 1) vn += vel.vbar[1](x) * nb;
        }
        d.g[k] = in.w0 * vn - net.phi(e, in.w0, in.y, a, b, in.t);
    }
    return d;
}

// b = f*area with boundary fluxes moved to the right side, for -Lap u = -b.
inline std::vector<double> assemble_rhs(const CellGrid& G, const CellData& d) {
    std::vector<double> b(G.size());
    for (int c = 0; c < G.size(); ++c) b[c] = d.f[c] * G.area(G.dim == 2 ? c : c / G.nth);
    if (G.dim == 2) {
        b[G.nr - 1] -= d.g[0];
        b[0] -= d.g[1];
    } else {
        for (int k = 0; k < G.nth; ++k) b[G.index(G.nr - 1, k)] -= d.g[k] * G.boundary_length(k);
    }
    return b;
}

// y = (-Lap) x in flux form; symmetric positive semidefinite.
inline void apply_neg_laplacian(const CellGrid& G, const std::vector<double>& x, std::vector<double>& y) {
    const double dr = G.dr();
    y.assign(G.size(), 0.0);
    if (G.dim == 2) {
        for (int i = 0; i + 1 < G.nr; ++i) {
            const double fl = (x[i + 1] - x[i]) / dr;
            y[i] -= fl;
            y[i + 1] += fl;
        }
        return;
    }
    const double dth = G.dth();
    for (int i = 0; i < G.nr; ++i) {
        const double ri = G.r(i);
        for (int k = 0; k < G.nth; ++k) {
            const int c = G.index(i, k);
            const int kn = G.index(i, (k + 1) % G.nth);
            const double fa = (x[kn] - x[c]) / (ri * dth) * dr;
            y[c] -= fa;
            y[kn] += fa;
            if (i + 1 < G.nr) {
                const int cn = G.index(i + 1, k);
                const double fr = (x[cn] - x[c]) / dr * ((i + 1) * dr) * dth;
                y[c] -= fr;
                y[cn] += fr;
            }
        }
    }
}

inline std::vector<double> neg_laplacian_diagonal(const CellGrid& G) {
    std::vector<double> diag(G.size());
    const double dr = G.dr();
    if (G.dim == 2) {
        for (int i = 0; i < G.nr; ++i) diag[i] = ((i > 0) + (i + 1 < G.nr)) / dr;
        return diag;
    }
    const double dth = G.dth();
    for (int i = 0; i < G.nr; ++i) {
        double d = 2.0 * dr / (G.r(i) * dth);
        if (i > 0) d += i * dr / dr * dth;
        if (i + 1 < G.nr) d += (i + 1) * dr / dr * dth;
        for (int k = 0; k < G.nth; ++k) diag[G.index(i, k)] = d;
    }
    return diag;
}

// Factorization of (-Lap) with cell 0 pinned, reused across solves on the same grid.
class CellFactor {
public:
    explicit CellFactor(const CellGrid& G) : G_(G) {
        const int n = G.size();
        std::vector<Eigen::Triplet<double>> trip;
        const double dr = G.dr();
        auto add = [&](int a, int b, double w) {
            if (a == 0 || b == 0) return;
            trip.emplace_back(a - 1, a - 1, w);
            trip.emplace_back(b - 1, b - 1, w);
            trip.emplace_back(a - 1, b - 1, -w);
            trip.emplace_back(b - 1, a - 1, -w);
        };
        auto add_pinned = [&](int a, int b, double w) {
            // one end pinned to zero: only the free diagonal remains
            if (a == 0 && b != 0) trip.emplace_back(b - 1, b - 1, w);
            else if (b == 0 && a != 0) trip.emplace_back(a - 1, a - 1, w);
            else add(a, b, w);
        };
        if (G.dim == 2) {
            for (int i = 0; i + 1 < G.nr; ++i) add_pinned(i, i + 1, 1.0 / dr);
        } else {
            const double dth = G.dth();
            for (int i = 0; i < G.nr; ++i)
                for (int k = 0; k < G.nth; ++k) {
                    const int c = G.index(i, k);
                    add_pinned(c, G.index(i, (k + 1) % G.nth), dr / (G.r(i) * dth));
                    if (i + 1 < G.nr) add_pinned(c, G.index(i + 1, k), (i + 1) * dth);
                }
        }
        Eigen::SparseMatrix<double> A(n - 1, n - 1);
        A.setFromTriplets(trip.begin(), trip.end());
        ldlt_.compute(A);
        if (ldlt_.info() != Eigen::Success) throw NumericalError("cell factorization failed");
    }

    const CellGrid& grid() const { return G_; }

    std::vector<double> solve(const std::vector<double>& b) const {
        const int n = G_.size();
        Eigen::VectorXd rhs(n - 1);
        for (int c = 1; c < n; ++c) rhs[c - 1] = -b[c];
        Eigen::VectorXd x = ldlt_.solve(rhs);
        std::vector<double> u(n, 0.0);
        for (int c = 1; c < n; ++c) u[c] = x[c - 1];
        return u;
    }

private:
    CellGrid G_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

inline double area_mean(const CellGrid& G, const std::vector<double>& u) {
    double s = 0.0, a = 0.0;
    for (int c = 0; c < G.size(); ++c) {
        const double ac = G.area(G.dim == 2 ? c : c / G.nth);
        s += u[c] * ac;
        a += ac;
    }
    return s / a;
}

// Boundary value from the quadratic through the two outermost cells with the Neumann slope.
inline std::vector<double> boundary_values(const CellGrid& G, const std::vector<double>& u, const std::vector<double>& g) {
    const double d = G.dr();
    auto extrap = [d](double u1, double u2, double slope) {
        const double c = (u2 - u1 + slope * d) / (2.0 * d * d);
        return u1 + slope * d / 2.0 - c * d * d / 4.0;
    };
    std::vector<double> out(G.boundary_count());
    if (G.dim == 2) {
        out[0] = extrap(u[G.nr - 1], u[G.nr - 2], g[0]);
        out[1] = extrap(u[0], u[1], g[1]);
        return out;
    }
    for (int k = 0; k < G.nth; ++k) out[k] = extrap(u[G.index(G.nr - 1, k)], u[G.index(G.nr - 2, k)], g[k]);
    return out;
}

}  // namespace detail

inline CellGrid cell_grid(const Network& net, int edge, const CellOptions& opt) {
    CellGrid G;
    G.dim = net.dim;
    G.h = net.edges[edge].h;
    G.nr = opt.nr;
    G.nth = net.dim == 2 ? 1 : opt.ntheta;
    return G;
}

// Subtracts the area-weighted mean in place.
inline void project_mean(const CellGrid& G, std::vector<double>& u) {
    const double m = detail::area_mean(G, u);
    for (double& x : u) x -= m;
}

inline double cell_solvability_residual(const Network& net, const CellInputs& in, const CellOptions& opt = {}) {
    const auto G = cell_grid(net, in.edge, opt);
    const auto d = detail::cell_data(net, in, G, opt.use_limit_identity);
    double s = 0.0;
    for (double b : detail::assemble_rhs(G, d)) s += b;
    return s;
}

inline CellSolution solve_cell_u1(const Network& net, const CellInputs& in, const CellOptions& opt = {},
                                  const detail::CellFactor* factor = nullptr) {
    CellSolution sol;
    sol.grid = cell_grid(net, in.edge, opt);
    const auto& G = sol.grid;
    const auto d = detail::cell_data(net, in, G, opt.use_limit_identity);
    auto b = detail::assemble_rhs(G, d);
    double scale = G.total_area();
    for (double x : b) {
        sol.residual += x;
        scale += std::abs(x);
    }
    if (std::abs(sol.residual) > opt.compat_tol * scale)
        throw CompatibilityError("cell problem incompatible on edge " + std::to_string(net.edges[in.edge].id) + " at y=" +
                                 fmt17(in.y) + ", t=" + fmt17(in.t) + ": residual " + fmt17(sol.residual));
    // compatibility projection: spread the imbalance over the area
    const double per_area = sol.residual / G.total_area();
    for (int c = 0; c < G.size(); ++c) b[c] -= per_area * G.area(G.dim == 2 ? c : c / G.nth);

    if (G.dim == 2) {
        // march the flux u' across the interval
        sol.u.assign(G.nr, 0.0);
        double flux = 0.0;
        const double dr = G.dr();
        for (int i = 0; i + 1 < G.nr; ++i) {
            flux += b[i];
            sol.u[i + 1] = sol.u[i] + flux * dr;
        }
    } else if (opt.method == CellMethod::direct || factor) {
        sol.u = factor ? factor->solve(b) : detail::CellFactor(G).solve(b);
    } else {
        std::vector<double> rhs(b.size());
        for (std::size_t c = 0; c < b.size(); ++c) rhs[c] = -b[c];
        auto apply = [&G](const std::vector<double>& x, std::vector<double>& y) { detail::apply_neg_laplacian(G, x, y); };
        sol.iterations = projected_cg(apply, detail::neg_laplacian_diagonal(G), rhs, sol.u, opt.cg_tol, opt.cg_max_iter);
    }
    project_mean(G, sol.u);
    sol.mean = detail::area_mean(G, sol.u);
    sol.boundary = detail::boundary_values(G, sol.u, d.g);
    return sol;
}

// (w0)'' minus the boundary average of dphi/ds(w0) * u1.
inline double corrector_source_f(const Network& net, const CellInputs& in, double w0_yy, const CellSolution& cell) {
    const auto& G = cell.grid;
    double acc = 0.0;
    for (int k = 0; k < G.boundary_count(); ++k) {
        double a, b, na, nb;
        G.boundary_point(k, a, b, na, nb);
        acc += net.dphi_ds(in.edge, in.w0, in.y, a, b, in.t) * cell.boundary[k] * G.boundary_length(k);
    }
    return w0_yy - acc / G.total_area();
}

// Boundary term provider for solve_w1: one cached factorization per edge grid,
// right sides built from the limit identity.
class CellCorrector {
public:
    CellCorrector(const Network& net, CellOptions opt = {}) : net_(net), opt_(opt) {
        opt_.use_limit_identity = true;
        opt_.method = CellMethod::direct;
    }

    double boundary_term(int e, double y, double t, double w0, double w0_y, double w0_t) {
        const auto* f = factor(e);
        CellInputs in{e, y, t, w0, w0_y, w0_t};
        const auto cell = solve_cell_u1(net_, in, opt_, f);
        return -corrector_source_f(net_, in, 0.0, cell);
    }

    CellTerm as_term() {
        return [this](int e, double y, double t, double w0, double wy, double wt) { return boundary_term(e, y, t, w0, wy, wt); };
    }

private:
    const detail::CellFactor* factor(int e) {
        if (net_.dim == 2) return nullptr;
        std::lock_guard<std::mutex> lk(mu_);
        const double h = net_.edges[e].h;
        auto it = cache_.find(h);
        if (it == cache_.end()) it = cache_.emplace(h, std::make_unique<detail::CellFactor>(cell_grid(net_, e, opt_))).first;
        return it->second.get();
    }

    const Network& net_;
    CellOptions opt_;
    std::mutex mu_;
    std::map<double, std::unique_ptr<detail::CellFactor>> cache_;
};

}  // namespace thinnet
