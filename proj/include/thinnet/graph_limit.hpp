#pragma once

// Edge solutions coupled through vertex closures: the alpha = 1 limit problem,
// the first corrector w1 and the alpha > 1 cascade.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "characteristics.hpp"
#include "network.hpp"
#include "numerics.hpp"

namespace thinnet {

struct GraphGrid {
    int nt = 400;
    double cells_per_unit = 200.0;
    int min_cells = 16;
    MocOptions moc;

    EdgeGrid edge_grid(const Network& net, int e) const {
        EdgeGrid g;
        g.L = net.edges[e].length;
        g.T = net.T;
        g.nt = nt;
        g.nx = std::max(min_cells, static_cast<int>(std::lround(g.L * cells_per_unit)));
        return g;
    }
};

enum class Level { w0, w1, w_alpha_minus_1, w_2alpha_minus_2 };

inline std::string level_name(Level l) {
    switch (l) {
        case Level::w0: return "w0";
        case Level::w1: return "w1";
        case Level::w_alpha_minus_1: return "w_alpha-1";
        case Level::w_2alpha_minus_2: return "w_2alpha-2";
    }
    return "?";
}

struct VertexTraces {
    int vertex = -1;                 // vertex index
    std::vector<int> edges;          // incident edge indices
    std::vector<TimeSeries> traces;  // w at the vertex end, same order as edges
    TimeSeries residual;             // sum omega v w - rhs on the time grid
    double kirchhoff_defect = 0.0;   // max |residual|
};

struct GraphSolution {
    Level level = Level::w0;
    std::vector<EdgeSolution> edges;
    std::vector<VertexTraces> vertices;

    double sample(int e, double y, double t) const { return edges[e].sample(y, t); }

    const VertexTraces& at_vertex(int v) const {
        for (auto& vt : vertices)
            if (vt.vertex == v) return vt;
        throw ConfigError("no traces stored for vertex index " + std::to_string(v));
    }

    TimeSeries trace(int v, int e) const {
        const auto& vt = at_vertex(v);
        for (std::size_t k = 0; k < vt.edges.size(); ++k)
            if (vt.edges[k] == e) return vt.traces[k];
        throw ConfigError("edge not incident to vertex");
    }

    double max_kirchhoff_defect() const {
        double m = 0.0;
        for (auto& v : vertices) m = std::max(m, v.kirchhoff_defect);
        return m;
    }

    double max_abs() const {
        double m = 0.0;
        for (auto& e : edges) m = std::max(m, e.max_abs());
        return m;
    }

    void write_csv(const Network& net, const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            std::ofstream f(dir / ("edge_" + std::to_string(net.edges[e].id) + ".csv"));
            edges[e].write_csv(f);
        }
        for (auto& vt : vertices) {
            std::ofstream f(dir / ("vertex_" + std::to_string(net.vertices[vt.vertex].id) + "_traces.csv"));
            f << "t,edge_id,trace\n";
            const std::size_t nt = vt.traces.empty() ? 0 : vt.traces.front().values.size();
            for (std::size_t n = 0; n < nt; ++n)
                for (std::size_t k = 0; k < vt.edges.size(); ++k)
                    f << fmt17(vt.traces[k].dt * n) << ',' << net.edges[vt.edges[k]].id << ',' << fmt17(vt.traces[k].values[n]) << '\n';
        }
    }
};

// ---------------------------------------------------------------------------
// Averaged nonlinearity

// phi-hat: boundary average of phi over the cross-section of edge e.
// 3D: (1/(pi h^2)) * circle integral (trapezoid, `nodes` points); 2D: (phi(+h) + phi(-h)) / (2h).
inline double averaged_boundary(const Network& net, int e, const Expr& f, double s, double y, double t, int nodes = 64) {
    const double h = net.edges[e].h;
    Vars x;
    x.s = s;
    x.y = y;
    x.t = t;
    const bool transverse = f.depends_on(Var::x2) || f.depends_on(Var::x3);
    if (net.dim == 2) {
        if (!transverse) return f(x) / h;
        x.x[1] = h;
        const double a = f(x);
        x.x[1] = -h;
        return (a + f(x)) / (2.0 * h);
    }
    if (!transverse) return 2.0 * f(x) / h;
    double acc = 0.0;
    for (int k = 0; k < nodes; ++k) {
        const double th = 2.0 * M_PI * k / nodes;
        x.x[1] = h * std::cos(th);
        x.x[2] = h * std::sin(th);
        acc += f(x);
    }
    return acc * (2.0 * M_PI * h / nodes) / (M_PI * h * h);
}

inline double averaged_phi(const Network& net, int e, double s, double y, double t, int nodes = 64) {
    const auto& nl = net.nonlin[e];
    if (!nl || y < nl->support_lo || y > nl->support_hi) return 0.0;
    return averaged_boundary(net, e, nl->phi, s, y, t, nodes);
}

inline double averaged_dphi_ds(const Network& net, int e, double s, double y, double t, int nodes = 64) {
    const auto& nl = net.nonlin[e];
    if (!nl || y < nl->support_lo || y > nl->support_hi) return 0.0;
    return averaged_boundary(net, e, nl->dphi_ds, s, y, t, nodes);
}

// ---------------------------------------------------------------------------
// Vertex closure

// Weights lambda_i splitting the inlet flux among outlets at time t.
inline std::vector<double> split_weights(const Network& net, const EdgeClassification& c, double t) {
    const auto& V = net.vertices[c.vertex];
    std::vector<double> lam(c.outlets.size());
    if (!V.split.empty()) {
        double total = 0.0;
        for (std::size_t k = 0; k < c.outlets.size(); ++k) {
            auto it = V.split.find(net.edges[c.outlets[k]].id);
            lam[k] = it == V.split.end() ? 0.0 : it->second;
            total += lam[k];
        }
        if (!(total > 0.0)) throw ConfigError("split weights at vertex " + std::to_string(V.id) + " do not cover its outlets");
        for (auto& l : lam) l /= total;
        return lam;
    }
    if (c.m == 1) {
        double total = 0.0;
        for (std::size_t k = 0; k < c.outlets.size(); ++k) {
            lam[k] = net.omega(c.outlets[k]) * net.vertex_velocity(c.vertex, c.outlets[k], t);
            total += lam[k];
        }
        for (auto& l : lam) l /= total;
        return lam;
    }
    for (auto& l : lam) l = 1.0 / static_cast<double>(c.outlets.size());
    return lam;
}

// Grid index of the end of edge e that sits at vertex v.
inline int vertex_end_index(const Network& net, int v, int e, const EdgeGrid& g) {
    return net.edge_starts_at(v, e) ? 0 : g.nx;
}

using EdgeSource = std::function<double(double w, double y, double t)>;

// Solves all edges in flow order.  `source(e)` is the right side Psi on edge e,
// `outer_data(e, t)` the data on edges fed from an outer end, `rhs[v]` the
// Kirchhoff right side at interior vertex index v (empty = 0).
inline GraphSolution solve_graph(const Network& net, const GraphGrid& gg, Level level,
                                 const std::function<EdgeSource(int)>& source,
                                 const std::function<double(int, double)>& outer_data,
                                 const std::vector<TimeSeries>& rhs = {}) {
    const int ne = static_cast<int>(net.edges.size());
    GraphSolution sol;
    sol.level = level;
    sol.edges.resize(ne);
    std::vector<char> done(ne, 0);

    auto solve_edge = [&](int e, const std::function<double(double)>& data) {
        const EdgeGrid g = gg.edge_grid(net, e);
        const EdgeSource psi = source(e);
        const auto& vel = net.velocity[e];
        auto v = [&](double y, double t) {
            Vars x;
            x.y = y;
            x.t = t;
            return vel.v1(x);
        };
        auto dv = [&](double y, double t) {
            Vars x;
            x.y = y;
            x.t = t;
            return vel.dv1_dy(x);
        };
        if (psi) sol.edges[e] = solve_edge_moc(v, dv, psi, data, g, gg.moc);
        else sol.edges[e] = solve_edge_moc(v, dv, [](double, double, double) { return 0.0; }, data, g, gg.moc);
        done[e] = 1;
    };

    for (int e = 0; e < ne; ++e) {
        const int up = net.upstream_vertex(e);
        if (net.vertices[up].kind == VertexKind::outer) solve_edge(e, [&, e](double t) { return outer_data(e, t); });
    }

    for (int v : flow_order(net)) {
        const auto c = classify_edges(net, v);
        for (int e : c.inlets)
            if (!done[e]) throw ConsistencyError("inlet edge " + std::to_string(net.edges[e].id) + " not solved before its vertex");
        const int nt = gg.nt;
        const double dt = net.T / nt;
        std::vector<std::vector<double>> data(c.outlets.size(), std::vector<double>(nt + 1));
        for (int n = 0; n <= nt; ++n) {
            const double t = dt * n;
            double inflow = 0.0;
            for (int e : c.inlets) {
                const auto g = gg.edge_grid(net, e);
                inflow += net.omega(e) * net.vertex_velocity(v, e, t) * sol.edges[e].at(vertex_end_index(net, v, e, g), n);
            }
            const double r = rhs.empty() || rhs[v].values.empty() ? 0.0 : rhs[v](t);
            const auto lam = split_weights(net, c, t);
            for (std::size_t k = 0; k < c.outlets.size(); ++k) {
                const int e = c.outlets[k];
                const double wv = net.omega(e) * net.vertex_velocity(v, e, t);
                if (wv == 0.0) throw ConfigError("outlet velocity vanishes at vertex " + std::to_string(net.vertices[v].id));
                data[k][n] = lam[k] * (r - inflow) / wv;
            }
        }
        for (std::size_t k = 0; k < c.outlets.size(); ++k) {
            TimeSeries ts(dt, data[k]);
            solve_edge(c.outlets[k], [ts](double t) { return cubic_sample(ts, t); });
        }

        VertexTraces vt;
        vt.vertex = v;
        vt.edges = net.incident(v);
        for (int e : vt.edges) vt.traces.push_back(sol.edges[e].trace(vertex_end_index(net, v, e, gg.edge_grid(net, e))));
        vt.residual = TimeSeries(dt, std::vector<double>(nt + 1, 0.0));
        for (int n = 0; n <= nt; ++n) {
            const double t = dt * n;
            double s = 0.0;
            for (std::size_t k = 0; k < vt.edges.size(); ++k)
                s += net.omega(vt.edges[k]) * net.vertex_velocity(v, vt.edges[k], t) * vt.traces[k].values[n];
            const double r = rhs.empty() || rhs[v].values.empty() ? 0.0 : rhs[v](t);
            vt.residual.values[n] = s - r;
            vt.kirchhoff_defect = std::max(vt.kirchhoff_defect, std::abs(s - r));
        }
        sol.vertices.push_back(std::move(vt));
    }
    for (int e = 0; e < ne; ++e)
        if (!done[e]) throw ConsistencyError("edge " + std::to_string(net.edges[e].id) + " was never reached by the flow");
    return sol;
}

// alpha = 1 limit: w_t + (v w)' = -phi-hat(w), data q on edges fed from outer ends.
inline GraphSolution solve_limit_alpha1(const Network& net, const GraphGrid& gg) {
    return solve_graph(
        net, gg, Level::w0,
        [&](int e) -> EdgeSource {
            if (!net.nonlin[e]) return {};
            return [&net, e](double w, double y, double t) { return -averaged_phi(net, e, w, y, t); };
        },
        [&](int e, double t) { return net.q(e, t); });
}

// Edge-grid field sampled bilinearly (same layout as EdgeSolution).
using GridField = EdgeSolution;

// Cross-section boundary term (1/|Y|) * integral of dphi/ds * u1 over the boundary,
// supplied by the cell solver for given (edge, y, t, w0, w0_y, w0_t).
using CellTerm = std::function<double(int e, double y, double t, double w0, double w0_y, double w0_t)>;

// f_i = (w0)'' - cell term on the edge grid of w0.
inline std::vector<GridField> corrector_sources(const Network& net, const GraphSolution& w0, const CellTerm& cell) {
    std::vector<GridField> out;
    for (std::size_t e = 0; e < w0.edges.size(); ++e) {
        const auto& W = w0.edges[e];
        const auto& g = W.grid;
        GridField f(g);
        std::vector<double> col(g.nx + 1);
        for (int n = 0; n <= g.nt; ++n) {
            for (int j = 0; j <= g.nx; ++j) col[j] = W.at(j, n);
            const auto d2 = second_derivative_5pt(col, g.dx());
            for (int j = 0; j <= g.nx; ++j) {
                double val = d2[j];
                const auto& nl = net.nonlin[e];
                const double y = g.x(j), t = g.t(n);
                if (cell && nl && y >= nl->support_lo && y <= nl->support_hi) {
                    const int b = std::clamp(j - 2, 0, g.nx - 4);
                    const auto wj = fd_weights(static_cast<double>(j - b), {0, 1, 2, 3, 4}, 1);
                    double wy = 0.0;
                    for (int k = 0; k < 5; ++k) wy += wj[k] * col[b + k];
                    wy /= g.dx();
                    double wt;
                    if (n == 0) wt = (-3 * W.at(j, 0) + 4 * W.at(j, 1) - W.at(j, 2)) / (2 * g.dt());
                    else if (n == g.nt) wt = (3 * W.at(j, n) - 4 * W.at(j, n - 1) + W.at(j, n - 2)) / (2 * g.dt());
                    else wt = (W.at(j, n + 1) - W.at(j, n - 1)) / (2 * g.dt());
                    val -= cell(static_cast<int>(e), y, t, col[j], wy, wt);
                }
                f.at(j, n) = val;
            }
        }
        out.push_back(std::move(f));
    }
    return out;
}

// First corrector: w1_t + v w1' = a w1 + f with a = -v' - dphi-hat/ds(w0); zero data on
// edges fed from outer ends, Kirchhoff right side d1[v] at interior vertices.
inline GraphSolution solve_w1(const Network& net, const GraphGrid& gg, const GraphSolution& w0,
                              const std::vector<GridField>& f, const std::vector<TimeSeries>& d1) {
    return solve_graph(
        net, gg, Level::w1,
        [&](int e) -> EdgeSource {
            const GridField* fe = &f[e];
            const EdgeSolution* we = &w0.edges[e];
            if (!net.nonlin[e]) return [fe](double, double y, double t) { return fe->sample(y, t); };
            return [&net, e, fe, we](double w, double y, double t) {
                return -averaged_dphi_ds(net, e, we->sample(y, t), y, t) * w + fe->sample(y, t);
            };
        },
        [](int, double) { return 0.0; }, d1);
}

struct Cascade {
    GraphSolution w0, w_am1, w_2am2;
};

// alpha > 1: three linear levels sharing the alpha = 1 closures.
inline Cascade solve_cascade_alpha_gt1(const Network& net, const GraphGrid& gg) {
    Cascade c;
    c.w0 = solve_graph(net, gg, Level::w0, [](int) { return EdgeSource{}; }, [&](int e, double t) { return net.q(e, t); });
    const GraphSolution* w0 = &c.w0;
    c.w_am1 = solve_graph(
        net, gg, Level::w_alpha_minus_1,
        [&net, w0](int e) -> EdgeSource {
            if (!net.nonlin[e]) return {};
            const EdgeSolution* we = &w0->edges[e];
            return [&net, e, we](double, double y, double t) { return -averaged_phi(net, e, we->sample(y, t), y, t); };
        },
        [](int, double) { return 0.0; });
    const GraphSolution* wa = &c.w_am1;
    c.w_2am2 = solve_graph(
        net, gg, Level::w_2alpha_minus_2,
        [&net, w0, wa](int e) -> EdgeSource {
            if (!net.nonlin[e]) return {};
            const EdgeSolution* we = &w0->edges[e];
            const EdgeSolution* wae = &wa->edges[e];
            return [&net, e, we, wae](double, double y, double t) {
                return -averaged_dphi_ds(net, e, we->sample(y, t), y, t) * wae->sample(y, t);
            };
        },
        [](int, double) { return 0.0; });
    return c;
}

}  // namespace thinnet
