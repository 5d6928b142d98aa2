#pragma once

// Outlet boundary layers: exponentially decaying corrections that restore the
// Dirichlet data at the outer end of each outlet edge.
//   Pi0 = Phi0 exp(-v eta)
//   Pi1 = (Phi1 + (Phi0 v'/v^2 - Phi0'/v) eta + (Phi0 v'/(2 v)) eta^2) exp(-v eta)
// with eta = (l - y) / eps and v the frozen outlet speed.

#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "graph_limit.hpp"
#include "network.hpp"
#include "numerics.hpp"

namespace thinnet {

using ScalarFn = std::function<double(double)>;

struct BoundaryLayer {
    int edge = -1;
    double T = 1.0;
    ScalarFn Phi0, Phi1, v;
    ScalarFn dPhi0, dv;  // optional; centred differences with step 1e-4 T otherwise

    double phi0(double t) const { return Phi0 ? Phi0(t) : 0.0; }
    double phi1(double t) const { return Phi1 ? Phi1(t) : 0.0; }

    double speed(double t) const {
        const double s = v(t);
        if (!(s > 0.0)) throw PositivityError("outlet speed must be positive for a boundary layer, got " + fmt17(s));
        return s;
    }

    double d_phi0(double t) const {
        if (dPhi0) return dPhi0(t);
        if (!Phi0) return 0.0;
        return centred(Phi0, t);
    }
    double d_speed(double t) const {
        if (dv) return dv(t);
        return centred(v, t);
    }

    double pi0(double eta, double t) const {
        check_eta(eta);
        return phi0(t) * std::exp(-speed(t) * eta);
    }

    // Polynomial prefactor P of Pi1 and its eta derivatives.
    void pi1_poly(double eta, double t, double& P, double& dP, double& d2P) const {
        const double s = speed(t), f = phi0(t), ds = d_speed(t), df = d_phi0(t);
        const double a = f * ds / (s * s) - df / s;
        const double b = f * ds / (2.0 * s);
        P = phi1(t) + a * eta + b * eta * eta;
        dP = a + 2.0 * b * eta;
        d2P = 2.0 * b;
    }

    double pi1(double eta, double t) const {
        check_eta(eta);
        double P, dP, d2P;
        pi1_poly(eta, t, P, dP, d2P);
        return P * std::exp(-speed(t) * eta);
    }

    // k-th layer (0 or 1) and its first and second eta derivatives.
    void derivatives(int k, double eta, double t, double& f, double& f1, double& f2) const {
        const double s = speed(t), e = std::exp(-s * eta);
        double P = phi0(t), dP = 0.0, d2P = 0.0;
        if (k == 1) pi1_poly(eta, t, P, dP, d2P);
        f = P * e;
        f1 = (dP - s * P) * e;
        f2 = (d2P - 2.0 * s * dP + s * s * P) * e;
    }

    double dpi0_dt(double eta, double t) const {
        return (d_phi0(t) - phi0(t) * d_speed(t) * eta) * std::exp(-speed(t) * eta);
    }

private:
    static void check_eta(double eta) {
        if (eta < 0.0) throw GeometryError("boundary layer variable must be nonnegative");
    }
    double centred(const ScalarFn& f, double t) const {
        const double h = 1e-4 * T;
        return (f(t + h) - f(t - h)) / (2.0 * h);
    }
};

// Max over the grid of |Pi_k'' + v Pi_k' - (k == 1 ? dPi0/dt : 0)|; eta derivatives are
// analytic unless `numeric_step` > 0, in which case centred differences of the closed form are used.
inline double layer_residual(const BoundaryLayer& L, int k, const std::vector<double>& etas, const std::vector<double>& times,
                             double numeric_step = 0.0) {
    if (k != 0 && k != 1) throw ConfigError("layer residual defined for k = 0 and k = 1");
    double worst = 0.0;
    for (double t : times)
        for (double eta : etas) {
            double f, f1, f2;
            L.derivatives(k, eta, t, f, f1, f2);
            if (numeric_step > 0.0) {
                const double h = numeric_step;
                auto val = [&](double x) { return k == 0 ? L.pi0(x, t) : L.pi1(x, t); };
                if (eta >= h) {
                    f1 = (val(eta + h) - val(eta - h)) / (2 * h);
                    f2 = (val(eta + h) - 2 * val(eta) + val(eta - h)) / (h * h);
                } else {  // one-sided at the outer end
                    const double a = val(eta), b = val(eta + h), c = val(eta + 2 * h), d = val(eta + 3 * h);
                    f1 = (-3 * a + 4 * b - c) / (2 * h);
                    f2 = (2 * a - 5 * b + 4 * c - d) / (h * h);
                }
            }
            const double rhs = k == 1 ? L.dpi0_dt(eta, t) : 0.0;
            worst = std::max(worst, std::abs(f2 + L.speed(t) * f1 - rhs));
        }
    return worst;
}

// Least-squares slope of log|Pi0| against eta at time t.
inline double fit_layer_decay(const BoundaryLayer& L, double t, const std::vector<double>& etas) {
    std::vector<double> x, y;
    for (double e : etas) {
        const double p = std::abs(L.pi0(e, t));
        if (p > 0.0) {
            x.push_back(e);
            y.push_back(std::log(p));
        }
    }
    if (x.size() < 2) throw NumericalError("layer decay fit needs a nonzero layer");
    return least_squares_line(x, y).slope;
}

// Edges whose outer end is a Dirichlet outlet: flow runs from the node end to an outer vertex.
inline std::vector<int> outlet_edges(const Network& net) {
    std::vector<int> out;
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const int to = net.vertex_index(net.edges[e].to);
        if (to >= 0 && net.vertices[to].kind == VertexKind::outer && net.flows_forward(static_cast<int>(e)))
            out.push_back(static_cast<int>(e));
    }
    return out;
}

// Outer-end trace of a graph level on edge e, read with the same bilinear sampler as the level itself.
inline ScalarFn outer_trace(const GraphSolution& g, int e) {
    const EdgeSolution* W = &g.edges[e];
    const double ell = W->grid.L;
    return [W, ell](double t) { return W->sample(ell, t); };
}

// Layers of every outlet: Phi0 = q - w0(l, t) and, when w1 is given, Phi1 = -w1(l, t).
inline std::vector<BoundaryLayer> make_outlet_layers(const Network& net, const GraphSolution& w0, const GraphSolution* w1 = nullptr) {
    std::vector<BoundaryLayer> out;
    for (int e : outlet_edges(net)) {
        BoundaryLayer L;
        L.edge = e;
        L.T = net.T;
        const double ell = net.edges[e].length;
        auto tr = outer_trace(w0, e);
        L.Phi0 = [&net, e, tr](double t) { return net.q(e, t) - tr(t); };
        if (w1) {
            auto t1 = outer_trace(*w1, e);
            L.Phi1 = [t1](double t) { return -t1(t); };
        }
        L.v = [&net, e, ell](double t) { return net.v1(e, ell, t); };
        L.dv = [&net, e, ell](double t) { return net.dv1_dt(e, ell, t); };
        out.push_back(std::move(L));
    }
    return out;
}

// Single-term layer carrying -w(l, t) of a higher cascade level.
inline std::vector<BoundaryLayer> make_level_layers(const Network& net, const GraphSolution& w) {
    std::vector<BoundaryLayer> out;
    for (int e : outlet_edges(net)) {
        BoundaryLayer L;
        L.edge = e;
        L.T = net.T;
        const double ell = net.edges[e].length;
        auto tr = outer_trace(w, e);
        L.Phi0 = [tr](double t) { return -tr(t); };
        L.v = [&net, e, ell](double t) { return net.v1(e, ell, t); };
        L.dv = [&net, e, ell](double t) { return net.dv1_dt(e, ell, t); };
        out.push_back(std::move(L));
    }
    return out;
}

}  // namespace thinnet
