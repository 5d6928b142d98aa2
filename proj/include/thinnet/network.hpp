#pragma once

// Network data model: edges, vertices with box-shaped nodes, per-edge velocity
// profiles, nonlinearities and inlet data, plus structural validation.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "expression.hpp"
#include "numerics.hpp"

namespace thinnet {

enum class VertexKind { interior, outer };

// Port of a node: the incident edge leaves the box along axis `axis` in direction `sign`.
struct Port {
    int edge = -1;
    int axis = 0;
    int sign = 1;
};

struct NodeShape {
    double ell0 = 0.25;
    std::array<double, 3> half_extent{0.25, 0.25, 0.25};
    std::vector<Port> ports;

    const Port* port_of(int edge) const {
        for (auto& p : ports)
            if (p.edge == edge) return &p;
        return nullptr;
    }
};

struct Vertex {
    int id = 0;
    VertexKind kind = VertexKind::outer;
    NodeShape shape;
    std::optional<Expr> phi0;
    std::map<int, double> split;  // optional outlet split weights keyed by edge id
};

struct Edge {
    int id = 0;
    int from = 0;  // node end, y = 0
    int to = 0;    // outer end, y = length
    double length = 1.0;
    double h = 1.0;
};

struct EdgeVelocity {
    Expr v1;
    std::vector<Expr> vbar;  // transverse components: 1 in 2D mode, 2 in 3D mode
    double delta = 0.1;      // width of the constant-velocity zone at interior ends
    Expr dv1_dy, dv1_dt, div_vbar;

    void finalize() {
        dv1_dy = v1.derivative(Var::y);
        dv1_dt = v1.derivative(Var::t);
        std::vector<Expr> d;
        for (std::size_t k = 0; k < vbar.size(); ++k) d.push_back(vbar[k].derivative(k == 0 ? Var::x2 : Var::x3));
        div_vbar = Expr::sum(d);
    }
};

struct EdgeNonlinearity {
    Expr phi;
    double support_lo = 0.0, support_hi = 0.0;
    Expr dphi_ds;

    void finalize() { dphi_ds = phi.derivative(Var::s); }
};

struct InletData {
    Expr q;
    int matching_order = 1;
    Expr dq_dt;

    void finalize() { dq_dt = q.derivative(Var::t); }
};

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
};

struct Network {
    int dim = 2;
    double T = 1.0;
    double alpha = 1.0;
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    std::vector<EdgeVelocity> velocity;                   // indexed like edges
    std::vector<std::optional<EdgeNonlinearity>> nonlin;  // indexed like edges
    std::vector<std::optional<InletData>> inlet;          // indexed like edges

    int vertex_index(int id) const {
        for (std::size_t i = 0; i < vertices.size(); ++i)
            if (vertices[i].id == id) return static_cast<int>(i);
        return -1;
    }
    int edge_index(int id) const {
        for (std::size_t i = 0; i < edges.size(); ++i)
            if (edges[i].id == id) return static_cast<int>(i);
        return -1;
    }

    double omega(int e) const { return std::pow(edges[e].h, dim - 1); }

    double v1(int e, double y, double t) const {
        Vars x;
        x.y = y;
        x.t = t;
        return velocity[e].v1(x);
    }
    double dv1_dy(int e, double y, double t) const {
        Vars x;
        x.y = y;
        x.t = t;
        return velocity[e].dv1_dy(x);
    }
    double dv1_dt(int e, double y, double t) const {
        Vars x;
        x.y = y;
        x.t = t;
        return velocity[e].dv1_dt(x);
    }
    double q(int e, double t) const {
        if (!inlet[e]) return 0.0;
        Vars x;
        x.t = t;
        return inlet[e]->q(x);
    }
    double dq_dt(int e, double t) const {
        if (!inlet[e]) return 0.0;
        Vars x;
        x.t = t;
        return inlet[e]->dq_dt(x);
    }
    // phi^(i)(s, y, xibar, t); zero when the edge has no nonlinearity.
    double phi(int e, double s, double y, double xi2, double xi3, double t) const {
        if (!nonlin[e]) return 0.0;
        Vars x;
        x.s = s;
        x.y = y;
        x.t = t;
        x.x = {0.0, xi2, xi3};
        return nonlin[e]->phi(x);
    }
    double dphi_ds(int e, double s, double y, double xi2, double xi3, double t) const {
        if (!nonlin[e]) return 0.0;
        Vars x;
        x.s = s;
        x.y = y;
        x.t = t;
        x.x = {0.0, xi2, xi3};
        return nonlin[e]->dphi_ds(x);
    }

    // Edge indices incident to vertex index v.
    std::vector<int> incident(int v) const {
        std::vector<int> out;
        const int id = vertices[v].id;
        for (std::size_t e = 0; e < edges.size(); ++e)
            if (edges[e].from == id || edges[e].to == id) out.push_back(static_cast<int>(e));
        return out;
    }

    // Velocity of edge e at vertex v in the direction pointing away from v.
    double vertex_velocity(int v, int e, double t) const {
        const int id = vertices[v].id;
        if (edges[e].from == id) return v1(e, 0.0, t);
        return -v1(e, edges[e].length, t);
    }

    // True when the node end (y = 0) of edge e sits at vertex v.
    bool edge_starts_at(int v, int e) const { return edges[e].from == vertices[v].id; }

    std::vector<int> interior_vertices() const {
        std::vector<int> out;
        for (std::size_t v = 0; v < vertices.size(); ++v)
            if (vertices[v].kind == VertexKind::interior) out.push_back(static_cast<int>(v));
        return out;
    }

    // Flow runs from the node end to the outer end when v1 > 0.
    bool flows_forward(int e) const { return v1(e, 0.0, 0.0) > 0.0; }

    // Vertex index at the upstream / downstream end of edge e.
    int upstream_vertex(int e) const { return vertex_index(flows_forward(e) ? edges[e].from : edges[e].to); }
    int downstream_vertex(int e) const { return vertex_index(flows_forward(e) ? edges[e].to : edges[e].from); }
};

// ---------------------------------------------------------------------------
// Flux balance and classification

// Sum of omega_i * v_i(t) at vertex v (outward velocities).
inline double vertex_flux_sum(const Network& net, int v, double t) {
    double s = 0.0;
    for (int e : net.incident(v)) s += net.omega(e) * net.vertex_velocity(v, e, t);
    return s;
}

// Signed flux sum of the interior vertex with the largest |sum|.
inline double flux_balance_defect(const Network& net, double t) {
    double worst = 0.0;
    for (int v : net.interior_vertices()) {
        const double s = vertex_flux_sum(net, v, t);
        if (std::abs(s) > std::abs(worst)) worst = s;
    }
    return worst;
}

struct EdgeClassification {
    int vertex = -1;
    int m = 0;
    int M = 0;
    std::vector<int> inlets;   // edges transporting toward the vertex
    std::vector<int> outlets;  // edges transporting away from the vertex
};

inline bool edge_single_signed(const Network& net, int e, double* worst = nullptr) {
    const int ny = 33, nt = 33;
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < ny; ++i)
        for (int n = 0; n < nt; ++n) {
            const double v = net.v1(e, net.edges[e].length * i / (ny - 1), net.T * n / (nt - 1));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (worst) *worst = std::min(std::abs(lo), std::abs(hi));
    return (lo > 0.0 && hi > 0.0) || (lo < 0.0 && hi < 0.0);
}

inline EdgeClassification classify_edges(const Network& net, int v) {
    EdgeClassification c;
    c.vertex = v;
    for (int e : net.incident(v)) {
        if (!edge_single_signed(net, e))
            throw SignChangeError("velocity changes sign on edge " + std::to_string(net.edges[e].id));
        (net.vertex_velocity(v, e, 0.0) < 0.0 ? c.inlets : c.outlets).push_back(e);
    }
    c.m = static_cast<int>(c.inlets.size());
    c.M = c.m + static_cast<int>(c.outlets.size());
    if (c.m < 1 || c.m > c.M - 1)
        throw ConfigError("vertex " + std::to_string(net.vertices[v].id) + " needs at least one inlet and one outlet");
    return c;
}

// Classification at the first interior vertex (single-junction networks).
inline EdgeClassification classify_edges(const Network& net) {
    auto iv = net.interior_vertices();
    if (iv.empty()) throw ConfigError("network has no interior vertex");
    return classify_edges(net, iv.front());
}

// Interior vertices in flow order: every vertex after all vertices feeding it.
inline std::vector<int> flow_order(const Network& net) {
    const int nv = static_cast<int>(net.vertices.size());
    std::vector<std::vector<int>> out(nv);
    std::vector<int> indeg(nv, 0);
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const int a = net.upstream_vertex(static_cast<int>(e)), b = net.downstream_vertex(static_cast<int>(e));
        if (a < 0 || b < 0) continue;
        out[a].push_back(b);
        ++indeg[b];
    }
    std::queue<int> ready;
    for (int v = 0; v < nv; ++v)
        if (indeg[v] == 0) ready.push(v);
    std::vector<int> order;
    while (!ready.empty()) {
        const int v = ready.front();
        ready.pop();
        if (net.vertices[v].kind == VertexKind::interior) order.push_back(v);
        for (int w : out[v])
            if (--indeg[w] == 0) ready.push(w);
    }
    for (int v = 0; v < nv; ++v)
        if (indeg[v] > 0) throw ConfigError("flow cycle detected through vertex " + std::to_string(net.vertices[v].id));
    return order;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {
inline std::string num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}
}  // namespace detail

inline ValidationReport validate(const Network& net) {
    ValidationReport r;
    auto add = [&](std::string s) { r.issues.push_back(std::move(s)); };
    using detail::num;

    if (net.dim != 2 && net.dim != 3) add("dimension_mode must be 2 or 3");
    if (!(net.T > 0.0)) add("horizon T must be positive");
    if (!(net.alpha > 0.0)) add("alpha must be positive");
    if (net.velocity.size() != net.edges.size() || net.nonlin.size() != net.edges.size() || net.inlet.size() != net.edges.size()) {
        add("per-edge tables do not match the edge list");
        return r;
    }

    bool refs_ok = true;
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const auto& E = net.edges[e];
        const std::string tag = "edge " + std::to_string(E.id);
        if (!(E.length > 0.0)) add(tag + ": length must be positive");
        if (!(E.h > 0.0)) add(tag + ": radius must be positive");
        for (int vid : {E.from, E.to})
            if (net.vertex_index(vid) < 0) {
                add(tag + " references missing vertex " + std::to_string(vid));
                refs_ok = false;
            }
    }
    if (!refs_ok) return r;

    // connectivity
    if (!net.vertices.empty()) {
        std::vector<char> seen(net.vertices.size(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int e : net.incident(v)) {
                const int w = net.vertex_index(net.edges[e].from == net.vertices[v].id ? net.edges[e].to : net.edges[e].from);
                if (!seen[w]) seen[w] = 1, stack.push_back(w);
            }
        }
        for (std::size_t v = 0; v < seen.size(); ++v)
            if (!seen[v]) add("graph is not connected: vertex " + std::to_string(net.vertices[v].id) + " unreachable");
    }

    // node geometry
    for (std::size_t vi = 0; vi < net.vertices.size(); ++vi) {
        const auto& V = net.vertices[vi];
        const std::string tag = "vertex " + std::to_string(V.id);
        const auto inc = net.incident(static_cast<int>(vi));
        if (V.kind == VertexKind::outer) {
            if (inc.size() != 1) add(tag + ": outer end must have exactly one incident edge");
            continue;
        }
        if (inc.size() < 2) add(tag + ": interior node needs at least 2 incident edges");
        const auto& S = V.shape;
        if (!(S.ell0 > 0.0 && S.ell0 < 1.0 / 3.0)) add(tag + ": ell0 must lie in (0, 1/3), got " + num(S.ell0));
        std::vector<std::pair<int, int>> used;
        for (int e : inc) {
            const Port* p = S.port_of(net.edges[e].id);
            if (!p) {
                add(tag + ": no port for edge " + std::to_string(net.edges[e].id));
                continue;
            }
            if (p->axis < 0 || p->axis >= net.dim) {
                add(tag + ": port axis out of range for edge " + std::to_string(net.edges[e].id));
                continue;
            }
            if (std::find(used.begin(), used.end(), std::make_pair(p->axis, p->sign)) != used.end())
                add(tag + ": ports overlap on face of edge " + std::to_string(net.edges[e].id));
            used.emplace_back(p->axis, p->sign);
            if (std::abs(S.half_extent[p->axis] - S.ell0) > 1e-12)
                add(tag + ": node half-extent along the port axis of edge " + std::to_string(net.edges[e].id) + " must equal ell0");
            for (int k = 0; k < net.dim; ++k)
                if (k != p->axis && net.edges[e].h > S.half_extent[k] + 1e-12)
                    add(tag + ": port of edge " + std::to_string(net.edges[e].id) + " wider than the node face");
        }
        for (auto& p : S.ports)
            if (net.edge_index(p.edge) < 0) add(tag + ": port references missing edge " + std::to_string(p.edge));
        for (auto& [eid, w] : V.split) {
            if (net.edge_index(eid) < 0) add(tag + ": split weight for missing edge " + std::to_string(eid));
            if (!(w > 0.0)) add(tag + ": split weights must be positive");
        }
    }

    const int nts = 41;
    // velocity structure
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const auto& E = net.edges[e];
        const auto& Vp = net.velocity[e];
        const std::string tag = "edge " + std::to_string(E.id);
        if (static_cast<int>(Vp.vbar.size()) != net.dim - 1 && !Vp.vbar.empty())
            add(tag + ": vbar must have " + std::to_string(net.dim - 1) + " components");
        if (!edge_single_signed(net, static_cast<int>(e))) {
            add("velocity changes sign on edge " + std::to_string(E.id));
            continue;
        }
        if (!(Vp.delta > 0.0 && Vp.delta < E.length)) add(tag + ": near-vertex width delta must lie in (0, length)");
        // constant zone at every interior end
        for (int end = 0; end < 2; ++end) {
            const int vid = end == 0 ? E.from : E.to;
            if (net.vertices[net.vertex_index(vid)].kind != VertexKind::interior) continue;
            double dev = 0.0, vb = 0.0;
            for (int n = 0; n < nts; ++n) {
                const double t = net.T * n / (nts - 1);
                const double y0 = end == 0 ? 0.0 : E.length;
                const double ref = net.v1(static_cast<int>(e), y0, t);
                for (int i = 0; i <= 10; ++i) {
                    const double y = end == 0 ? Vp.delta * i / 10.0 : E.length - Vp.delta * i / 10.0;
                    dev = std::max(dev, std::abs(net.v1(static_cast<int>(e), y, t) - ref));
                    for (auto& c : Vp.vbar)
                        for (double xi : {-E.h, 0.0, E.h}) {
                            Vars x;
                            x.y = y;
                            x.t = t;
                            x.x = {0.0, xi, net.dim == 3 ? xi * 0.5 : 0.0};
                            vb = std::max(vb, std::abs(c(x)));
                        }
                }
            }
            if (dev > 1e-12) add(tag + ": v1 not constant near vertex " + std::to_string(vid) + ", deviation " + num(dev));
            if (vb > 1e-12) add(tag + ": vbar not zero near vertex " + std::to_string(vid) + ", magnitude " + num(vb));
        }
        // outlet end feeding an outer Dirichlet boundary
        const int down = net.downstream_vertex(static_cast<int>(e));
        if (net.vertices[down].kind == VertexKind::outer && net.flows_forward(static_cast<int>(e))) {
            double dev = 0.0, vmin = INFINITY;
            for (int n = 0; n < nts; ++n) {
                const double t = net.T * n / (nts - 1);
                const double ref = net.v1(static_cast<int>(e), E.length, t);
                vmin = std::min(vmin, ref);
                for (int i = 0; i <= 10; ++i)
                    dev = std::max(dev, std::abs(net.v1(static_cast<int>(e), E.length - Vp.delta * i / 10.0, t) - ref));
            }
            if (dev > 1e-12) add(tag + ": v1 not constant near the outlet end, deviation " + num(dev));
            if (!(vmin > 0.0)) add(tag + ": outlet speed must stay positive");
        }
    }

    // compatibility
    for (int v : net.interior_vertices()) {
        double worst = 0.0;
        bool bad = false;
        for (int n = 0; n < nts; ++n) {
            const double t = net.T * n / (nts - 1);
            double s = 0.0, scale = 0.0;
            for (int e : net.incident(v)) {
                const double f = net.omega(e) * net.vertex_velocity(v, e, t);
                s += f;
                scale = std::max(scale, std::abs(f));
            }
            if (std::abs(s) > 1e-12 * scale) bad = true;
            if (std::abs(s) > std::abs(worst)) worst = s;
        }
        if (bad) add("compatibility violated at vertex " + std::to_string(net.vertices[v].id) + ", defect " + num(std::abs(worst)));
    }

    // nonlinearity support
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        if (!net.nonlin[e]) continue;
        const auto& N = *net.nonlin[e];
        const auto& E = net.edges[e];
        const std::string tag = "edge " + std::to_string(E.id);
        if (!(N.support_lo > 0.0 && N.support_lo < N.support_hi && N.support_hi < E.length)) {
            add(tag + ": support window must be a sub-interval of (0, length)");
            continue;
        }
        double worst = 0.0;
        for (int i = 0; i <= 60; ++i) {
            const double y = E.length * i / 60.0;
            if (y >= N.support_lo && y <= N.support_hi) continue;
            for (int n = 0; n < 9; ++n)
                for (double s : {-1.0, 0.5, 1.0, 3.0})
                    for (double xi : {-E.h, E.h})
                        worst = std::max(worst, std::abs(net.phi(static_cast<int>(e), s, y, xi, 0.0, net.T * n / 8.0)));
        }
        if (worst > 1e-12) add(tag + ": nonlinearity nonzero outside support window, magnitude " + num(worst));
    }
    for (std::size_t v = 0; v < net.vertices.size(); ++v) {
        const auto& V = net.vertices[v];
        if (!V.phi0 || V.kind != VertexKind::interior) continue;
        double worst = 0.0, at0 = 0.0;
        for (auto& p : V.shape.ports) {
            const int e = net.edge_index(p.edge);
            if (e < 0) continue;
            const double h = net.edges[e].h;
            for (int a = -4; a <= 4; ++a)
                for (double s : {0.5, 1.0, 3.0}) {
                    Vars x;
                    x.s = s;
                    x.t = net.T * 0.5;
                    x.x = {0, 0, 0};
                    x.x[p.axis] = p.sign * V.shape.ell0;
                    const int other = p.axis == 0 ? 1 : 0;
                    x.x[other] = h * a / 4.0;
                    worst = std::max(worst, std::abs((*V.phi0)(x)));
                }
        }
        for (double s : {0.5, 1.0, 3.0}) {
            Vars x;
            x.s = s;
            at0 = std::max(at0, std::abs((*V.phi0)(x)));
        }
        if (worst > 1e-12) add("vertex " + std::to_string(V.id) + ": phi0 nonzero on a port, magnitude " + num(worst));
        if (at0 > 1e-12) add("vertex " + std::to_string(V.id) + ": phi0 nonzero at t = 0, magnitude " + num(at0));
    }

    // inlet data on edges fed from an outer end
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const auto& E = net.edges[e];
        const int up = net.upstream_vertex(static_cast<int>(e));
        if (up < 0 || !edge_single_signed(net, static_cast<int>(e))) continue;
        if (net.vertices[up].kind != VertexKind::outer) continue;
        if (!net.inlet[e]) {
            add("edge " + std::to_string(E.id) + ": missing inlet data");
            continue;
        }
        const auto& Q = *net.inlet[e];
        double qmin = INFINITY;
        for (int n = 0; n <= 200; ++n) qmin = std::min(qmin, net.q(static_cast<int>(e), net.T * n / 200.0));
        if (qmin < -1e-14) add("edge " + std::to_string(E.id) + ": inlet data negative, minimum " + num(qmin));
        // derivatives at t = 0 by one-sided differences of increasing order
        const double hstep = 1e-3 * net.T;
        for (int k = 0; k <= std::max(1, Q.matching_order); ++k) {
            std::vector<double> nodes;
            for (int j = 0; j <= k + 2; ++j) nodes.push_back(j * hstep);
            const auto w = fd_weights(0.0, nodes, k);
            double d = 0.0;
            for (std::size_t j = 0; j < nodes.size(); ++j) d += w[j] * net.q(static_cast<int>(e), nodes[j]);
            const double tol = 1e-8 * std::pow(1.0 / hstep, k) * std::max(1.0, std::abs(net.q(static_cast<int>(e), net.T)));
            if (std::abs(d) > std::max(tol, k == 0 ? 1e-14 : 1e-6))
                add("matching condition order " + std::to_string(k) + " violated on edge " + std::to_string(E.id) + ", magnitude " + num(std::abs(d)));
        }
    }

    try {
        (void)flow_order(net);
    } catch (const ConfigError& ex) {
        add(ex.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// JSON loading

inline Port parse_port(const nlohmann::json& j) {
    Port p;
    p.edge = j.at("edge").get<int>();
    const auto dir = j.at("dir").get<std::string>();
    if (dir.size() != 2 || (dir[0] != '+' && dir[0] != '-')) throw ConfigError("port direction must look like +x, -y, +z");
    p.sign = dir[0] == '+' ? 1 : -1;
    switch (dir[1]) {
        case 'x': p.axis = 0; break;
        case 'y': p.axis = 1; break;
        case 'z': p.axis = 2; break;
        default: throw ConfigError("port direction must look like +x, -y, +z");
    }
    return p;
}

inline Network network_from_json(const nlohmann::json& j) {
    Network net;
    try {
        const auto& o = j.at("options");
        net.dim = o.value("dimension_mode", 2);
        net.T = o.at("T").get<double>();
        net.alpha = o.value("alpha", 1.0);
        for (auto& jv : j.at("vertices")) {
            Vertex v;
            v.id = jv.at("id").get<int>();
            const auto kind = jv.value("kind", std::string("outer"));
            if (kind == "node" || kind == "interior") v.kind = VertexKind::interior;
            else if (kind == "outer") v.kind = VertexKind::outer;
            else throw ConfigError("vertex kind must be 'node' or 'outer'");
            if (v.kind == VertexKind::interior) {
                v.shape.ell0 = jv.value("ell0", 0.25);
                v.shape.half_extent = {v.shape.ell0, v.shape.ell0, v.shape.ell0};
                if (jv.contains("half_extent")) {
                    auto he = jv["half_extent"].get<std::vector<double>>();
                    for (std::size_t k = 0; k < he.size() && k < 3; ++k) v.shape.half_extent[k] = he[k];
                }
                for (auto& jp : jv.at("ports")) v.shape.ports.push_back(parse_port(jp));
                if (jv.contains("phi0")) v.phi0 = parse_expr(jv["phi0"]);
                if (jv.contains("split"))
                    for (auto& [k, w] : jv["split"].items()) v.split[std::stoi(k)] = w.get<double>();
            }
            net.vertices.push_back(std::move(v));
        }
        for (auto& je : j.at("edges")) {
            Edge e;
            e.id = je.at("id").get<int>();
            e.from = je.at("from").get<int>();
            e.to = je.at("to").get<int>();
            e.length = je.at("length").get<double>();
            e.h = je.at("h").get<double>();
            net.edges.push_back(e);
        }
        const std::size_t ne = net.edges.size();
        net.velocity.resize(ne);
        net.nonlin.resize(ne);
        net.inlet.resize(ne);
        std::vector<char> have_v(ne, 0);
        for (auto& jv : j.at("velocity")) {
            const int e = net.edge_index(jv.at("edge").get<int>());
            if (e < 0) throw ConfigError("velocity entry for unknown edge");
            auto& V = net.velocity[e];
            V.v1 = parse_expr(jv.at("v1"));
            if (jv.contains("vbar"))
                for (auto& c : jv["vbar"]) V.vbar.push_back(parse_expr(c));
            V.delta = jv.value("delta", 0.1 * net.edges[e].length);
            V.finalize();
            have_v[e] = 1;
        }
        for (std::size_t e = 0; e < ne; ++e)
            if (!have_v[e]) throw ConfigError("missing velocity for edge " + std::to_string(net.edges[e].id));
        if (j.contains("nonlinearity"))
            for (auto& jn : j["nonlinearity"]) {
                const int e = net.edge_index(jn.at("edge").get<int>());
                if (e < 0) throw ConfigError("nonlinearity entry for unknown edge");
                EdgeNonlinearity N;
                N.phi = parse_expr(jn.at("phi"));
                auto sup = jn.at("support").get<std::array<double, 2>>();
                N.support_lo = sup[0];
                N.support_hi = sup[1];
                N.finalize();
                net.nonlin[e] = N;
            }
        if (j.contains("inlet_data"))
            for (auto& jq : j["inlet_data"]) {
                const int e = net.edge_index(jq.at("edge").get<int>());
                if (e < 0) throw ConfigError("inlet data for unknown edge");
                InletData Q;
                Q.q = parse_expr(jq.at("q"));
                Q.matching_order = jq.value("matching_order", 1);
                Q.finalize();
                net.inlet[e] = Q;
            }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("network description: ") + ex.what());
    }
    return net;
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open network description '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError("network description '" + path + "': " + ex.what());
    }
    return network_from_json(j.contains("network") ? j["network"] : j);
}

// Copy of the network with every nonlinearity removed.
inline Network without_nonlinearity(Network net) {
    for (auto& n : net.nonlin) n.reset();
    for (auto& v : net.vertices) v.phi0.reset();
    return net;
}

}  // namespace thinnet
