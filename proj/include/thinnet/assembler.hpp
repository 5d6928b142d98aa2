#pragma once

// Composite approximations on the thin domain: regular edge parts away from the
// nodes, node layers near them, outlet layers at the outer ends, blended by cut-offs.

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <tuple>
#include <vector>

#include "boundary_layer.hpp"
#include "cell_section.hpp"
#include "cutoff.hpp"
#include "errors.hpp"
#include "graph_limit.hpp"
#include "junction_mesh.hpp"
#include "network.hpp"
#include "node_elliptic.hpp"

namespace thinnet {

struct AssemblyOptions {
    double eps = 0.1;
    double gamma = 0.9;
    double delta = 0.0;            // outlet blend width; <= 0 picks the default
    double alpha = 1.0;
    bool with_correctors = false;  // adds eps (w1 + u1 + chi_delta Pi1) to the regular part
    double trace_tol = 1e-10;
};

// Half the smallest gap between a nonlinearity window and the outer end of an outlet.
// Outlets without a nonlinearity contribute a gap of half their length.
inline double default_outlet_delta(const Network& net) {
    double gap = INFINITY;
    for (int e : outlet_edges(net)) {
        const double ell = net.edges[e].length;
        const double hi = net.nonlin[e] ? net.nonlin[e]->support_hi : 0.5 * ell;
        gap = std::min(gap, ell - hi);
    }
    if (!std::isfinite(gap)) return 0.1;
    if (!(gap > 0.0)) throw ConfigError("nonlinearity window reaches the outer end of an outlet: no room for the outlet layer blend");
    return 0.5 * gap;
}

// Cell-problem value at transverse point (xi2, xi3), interpolated from cell centres and boundary values.
inline double cell_sample(const CellSolution& s, double xi2, double xi3) {
    const auto& G = s.grid;
    if (G.dim == 2) {
        const double x = std::clamp(xi2, -G.h, G.h);
        const double u = (x + G.h) / G.dr() - 0.5;
        if (u <= 0.0) return s.boundary[1] + (s.at(0) - s.boundary[1]) * (x + G.h) / (0.5 * G.dr());
        if (u >= G.nr - 1) return s.at(G.nr - 1) + (s.boundary[0] - s.at(G.nr - 1)) * (u - (G.nr - 1)) * 2.0;
        const int i = static_cast<int>(u);
        const double f = u - i;
        return (1 - f) * s.at(i) + f * s.at(i + 1);
    }
    const double r = std::min(std::hypot(xi2, xi3), G.h);
    double th = std::atan2(xi3, xi2);
    if (th < 0) th += 2 * M_PI;
    const double v = th / G.dth() - 0.5;
    int k0 = static_cast<int>(std::floor(v));
    const double fk = v - k0;
    k0 = (k0 % G.nth + G.nth) % G.nth;
    const int k1 = (k0 + 1) % G.nth;
    auto ring = [&](int i) { return (1 - fk) * s.at(i, k0) + fk * s.at(i, k1); };
    const double ui = r / G.dr() - 0.5;
    if (ui <= 0.0) return ring(0);
    if (ui >= G.nr - 1) {
        const double b = (1 - fk) * s.boundary[k0] + fk * s.boundary[k1];
        return ring(G.nr - 1) + (b - ring(G.nr - 1)) * (ui - (G.nr - 1)) * 2.0;
    }
    const int i = static_cast<int>(ui);
    const double f = ui - i;
    return (1 - f) * ring(i) + f * ring(i + 1);
}

// u1(y, xibar, t) from the cell problem in identity mode, cached by (edge, y, t).
class CellProfile {
public:
    CellProfile(std::shared_ptr<const Network> net, std::shared_ptr<const GraphSolution> w0, CellOptions opt = {})
        : net_(std::move(net)), w0_(std::move(w0)), opt_(opt) {
        opt_.use_limit_identity = true;
        opt_.method = CellMethod::direct;
    }

    double operator()(int e, double y, double xi2, double xi3, double t) const {
        std::shared_ptr<const CellSolution> s;
        const auto key = std::make_tuple(e, y, t);
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) s = it->second;
        }
        if (!s) {
            if (!net_->nonlin[e] && net_->velocity[e].vbar.empty()) return 0.0;
            const double w = w0_->sample(e, y, t);
            s = std::make_shared<const CellSolution>(solve_cell_u1(*net_, CellInputs{e, y, t, w, 0.0, 0.0}, opt_));
            std::lock_guard<std::mutex> lk(mu_);
            if (cache_.size() > 200000) cache_.clear();
            cache_.emplace(key, s);
        }
        return cell_sample(*s, xi2, xi3);
    }

private:
    std::shared_ptr<const Network> net_;
    std::shared_ptr<const GraphSolution> w0_;
    CellOptions opt_;
    mutable std::mutex mu_;
    mutable std::map<std::tuple<int, double, double>, std::shared_ptr<const CellSolution>> cache_;
};

template <int Dim>
struct NodeBlock {
    int vertex = -1;
    std::shared_ptr<const JunctionMesh<Dim>> mesh;
    std::shared_ptr<const NodeLayerSeries<Dim>> N0;
    std::shared_ptr<const NodeLayerSeries<Dim>> N_am1;  // alpha in (1, 2) only
    std::shared_ptr<const NodeLayerSeries<Dim>> N1;     // far targets w1; with correctors only
};

template <int Dim>
class Approximation {
public:
    using Point = typename JunctionMesh<Dim>::Point;

    std::shared_ptr<const Network> net;
    AssemblyOptions opt;
    double delta = 0.1;
    std::shared_ptr<const GraphSolution> w0, w_am1, w1;
    std::vector<NodeBlock<Dim>> nodes;
    std::vector<BoundaryLayer> layers;      // Pi0 (and Pi1 when w1 is present), one per outlet
    std::vector<BoundaryLayer> layers_am1;  // Pi_{alpha-1}
    std::shared_ptr<const CellProfile> u1;

    double eps() const { return opt.eps; }
    double level_weight() const { return std::pow(opt.eps, opt.alpha - 1.0); }

    // Edge point at axial coordinate y and unit-scale transverse coordinates.
    double evaluate_edge(int e, double y, double xi2, double xi3, double t) const {
        check_edge_point(e, y, xi2, xi3);
        const auto [node, r] = nearest_node(e, y);
        if (node < 0) return regular(e, y, xi2, xi3, t);
        const auto& B = nodes[node];
        const double chi = NodeCutoff{B.mesh->ell0()}(r / std::pow(opt.eps, opt.gamma));
        if (chi >= 1.0) return regular(e, y, xi2, xi3, t);
        const double n = node_part(B, to_node(B, e, r, xi2, xi3), t);
        if (chi <= 0.0) return n;
        return chi * regular(e, y, xi2, xi3, t) + (1.0 - chi) * n;
    }

    // Point of the node box (unit-scale coordinates centred on the node).
    double evaluate_node(int v, const Point& xi, double t) const {
        for (auto& B : nodes)
            if (B.vertex == v) {
                if (!B.mesh->contains(xi)) throw GeometryError("point outside the junction mesh");
                return node_part(B, xi, t);
            }
        throw GeometryError("no node layer assembled for vertex index " + std::to_string(v));
    }

    // Regular part: w0 (+ eps^(alpha-1) w_{alpha-1}) plus blended outlet layers, with optional first-order terms.
    double regular(int e, double y, double xi2, double xi3, double t) const {
        double w = w0->sample(e, y, t);
        if (w_am1) w += level_weight() * w_am1->sample(e, y, t);
        if (w1 && opt.with_correctors) {
            w += opt.eps * w1->sample(e, y, t);
            if (u1) w += opt.eps * (*u1)(e, y, xi2, xi3, t);
        }
        const double ell = net->edges[e].length;
        const double cd = OutletCutoff{ell, delta}(y);
        if (cd > 0.0) {
            const double eta = (ell - y) / opt.eps;
            for (auto& L : layers)
                if (L.edge == e) {
                    double b = L.pi0(eta, t);
                    if (w1 && opt.with_correctors) b += opt.eps * L.pi1(eta, t);
                    w += cd * b;
                }
            for (auto& L : layers_am1)
                if (L.edge == e) w += cd * level_weight() * L.pi0(eta, t);
        }
        return w;
    }

    double node_part(const NodeBlock<Dim>& B, const Point& xi, double t) const {
        double n = B.N0->sample(xi, t);
        if (B.N_am1) n += level_weight() * B.N_am1->sample(xi, t);
        if (B.N1 && w1 && opt.with_correctors) n += opt.eps * B.N1->sample(xi, t);
        return n;
    }

    // Interior vertex nearest to point y of edge e and the distance to it; (-1, inf) for none.
    std::pair<int, double> nearest_node(int e, double y) const {
        const auto& E = net->edges[e];
        int best = -1;
        double r = INFINITY;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const int id = net->vertices[nodes[k].vertex].id;
            if (E.from == id && y < r) {
                best = static_cast<int>(k);
                r = y;
            }
            if (E.to == id && E.length - y < r) {
                best = static_cast<int>(k);
                r = E.length - y;
            }
        }
        return {best, r};
    }

    // Unit-scale node coordinates of an edge point at distance r from the node.
    Point to_node(const NodeBlock<Dim>& B, int e, double r, double xi2, double xi3) const {
        const int k = B.mesh->stub_of_edge(e);
        if (k < 0) throw GeometryError("edge does not meet this node");
        const auto& s = B.mesh->stubs()[k];
        Point xi{};
        xi[s.axis] = s.sign * r / opt.eps;
        const double tr[2] = {xi2, xi3};
        int j = 0;
        for (int a = 0; a < Dim; ++a)
            if (a != s.axis) xi[a] = tr[j++];
        return xi;
    }

private:
    void check_edge_point(int e, double y, double xi2, double xi3) const {
        if (e < 0 || e >= static_cast<int>(net->edges.size())) throw GeometryError("edge index out of range");
        const double h = net->edges[e].h, tol = 1e-12;
        if (y < -tol || y > net->edges[e].length + tol) throw GeometryError("axial coordinate outside the edge");
        const bool inside = Dim == 2 ? std::abs(xi2) <= h + tol : std::max(std::abs(xi2), std::abs(xi3)) <= h + tol;
        if (!inside) throw GeometryError("transverse coordinate outside the cross-section");
    }
};

namespace detail {

template <int Dim>
void check_nodes(const Network& net, const GraphSolution& level, const std::vector<NodeBlock<Dim>>& nodes,
                 bool alpha_level, double tol) {
    const auto order = flow_order(net);
    if (order.size() != nodes.size()) throw ConsistencyError("one node layer is needed per interior vertex");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k].vertex != order[k])
            throw ConsistencyError("node layers must be assembled in flow order; vertex " +
                                   std::to_string(net.vertices[nodes[k].vertex].id) + " is out of place");
        const auto* S = alpha_level ? nodes[k].N_am1.get() : nodes[k].N0.get();
        if (!S) throw ConsistencyError("node layer series missing");
        for (std::size_t s = 0; s < S->targets.size(); ++s) {
            const auto tr = level.trace(nodes[k].vertex, nodes[k].mesh->stubs()[s].edge);
            if (tr.values.size() != S->targets[s].values.size())
                throw ConsistencyError("node layer and graph level on different time grids");
            for (std::size_t n = 0; n < tr.values.size(); ++n)
                if (std::abs(tr.values[n] - S->targets[s].values[n]) > tol * std::max(1.0, std::abs(tr.values[n])))
                    throw ConsistencyError("node far target differs from the vertex trace at vertex " +
                                           std::to_string(net.vertices[nodes[k].vertex].id));
        }
    }
}

}  // namespace detail

template <int Dim>
Approximation<Dim> assemble_zero_order(std::shared_ptr<const Network> net, std::shared_ptr<const GraphSolution> w0,
                                       std::vector<NodeBlock<Dim>> nodes, std::vector<BoundaryLayer> layers, AssemblyOptions opt) {
    if (!(opt.gamma > 2.0 / 3.0 && opt.gamma < 1.0)) throw ConfigError("gamma must lie in (2/3, 1)");
    if (!(opt.eps > 0.0)) throw ConfigError("eps must be positive");
    detail::check_nodes(*net, *w0, nodes, false, opt.trace_tol);
    Approximation<Dim> A;
    A.net = std::move(net);
    A.opt = opt;
    A.delta = opt.delta > 0.0 ? opt.delta : default_outlet_delta(*A.net);
    for (int e : outlet_edges(*A.net))
        if (A.net->nonlin[e] && A.net->edges[e].length - 2.0 * A.delta < A.net->nonlin[e]->support_hi)
            throw ConfigError("outlet blend overlaps the nonlinearity window on edge " + std::to_string(A.net->edges[e].id));
    A.w0 = std::move(w0);
    A.nodes = std::move(nodes);
    A.layers = std::move(layers);
    return A;
}

template <int Dim>
Approximation<Dim> assemble_alpha(std::shared_ptr<const Network> net, std::shared_ptr<const GraphSolution> w0,
                                  std::shared_ptr<const GraphSolution> w_am1, std::vector<NodeBlock<Dim>> nodes,
                                  std::vector<BoundaryLayer> layers0, std::vector<BoundaryLayer> layers_am1, AssemblyOptions opt) {
    if (!(opt.alpha > 1.0 && opt.alpha < 2.0)) throw ConfigError("the cascade approximation needs alpha in (1, 2)");
    if (!w_am1) throw ConsistencyError("level w_{alpha-1} missing");
    detail::check_nodes(*net, *w_am1, nodes, true, opt.trace_tol);
    auto A = assemble_zero_order<Dim>(net, std::move(w0), std::move(nodes), std::move(layers0), opt);
    A.w_am1 = std::move(w_am1);
    A.layers_am1 = std::move(layers_am1);
    return A;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions {
    AssemblyOptions assembly;
    GraphGrid graph;
    double node_spacing = 1.0 / 16;
    double L_trunc = 8.0;
    NodeLayerOptions node;
    CellOptions cell;
};

// Unit-scale stub length that covers the blend zone with room for the decay fit.
inline double node_stub_length(const Network& net, int v, const PipelineOptions& p) {
    const double ell0 = net.vertices[v].shape.ell0;
    const double need = 3.0 * ell0 * std::pow(p.assembly.eps, p.assembly.gamma - 1.0) + 2.0;
    return std::max(p.L_trunc, std::ceil(need / p.node_spacing) * p.node_spacing);
}

// All limit stages for one eps: graph levels, node layers, outlet layers, assembled.
// alpha >= 2 drops the nonlinearity entirely.
template <int Dim>
Approximation<Dim> build_approximation(const Network& input, const PipelineOptions& p) {
    const double alpha = p.assembly.alpha;
    auto net = std::make_shared<const Network>(alpha >= 2.0 ? without_nonlinearity(input) : input);
    std::vector<NodeBlock<Dim>> nodes;
    auto make_nodes = [&](const GraphSolution& lvl0, const GraphSolution* lvl1) {
        for (int v : flow_order(*net)) {
            NodeBlock<Dim> B;
            B.vertex = v;
            B.mesh = std::make_shared<const JunctionMesh<Dim>>(*net, v, p.node_spacing, node_stub_length(*net, v, p));
            B.N0 = std::make_shared<const NodeLayerSeries<Dim>>(build_node_series(*net, *B.mesh, lvl0, p.node));
            if (lvl1) B.N_am1 = std::make_shared<const NodeLayerSeries<Dim>>(build_node_series(*net, *B.mesh, *lvl1, p.node));
            nodes.push_back(std::move(B));
        }
    };
    if (alpha > 1.0 && alpha < 2.0) {
        auto c = solve_cascade_alpha_gt1(*net, p.graph);
        auto w0 = std::make_shared<const GraphSolution>(std::move(c.w0));
        auto wa = std::make_shared<const GraphSolution>(std::move(c.w_am1));
        make_nodes(*w0, wa.get());
        auto l0 = make_outlet_layers(*net, *w0);
        auto la = make_level_layers(*net, *wa);
        return assemble_alpha<Dim>(net, w0, wa, std::move(nodes), std::move(l0), std::move(la), p.assembly);
    }
    if (alpha != 1.0 && alpha < 2.0) throw ConfigError("alpha must be 1, in (1, 2), or at least 2");
    auto w0 = std::make_shared<const GraphSolution>(solve_limit_alpha1(*net, p.graph));
    make_nodes(*w0, nullptr);
    std::shared_ptr<const GraphSolution> w1;
    if (p.assembly.with_correctors) {
        std::vector<TimeSeries> d1(net->vertices.size());
        for (auto& B : nodes) d1[B.vertex] = compute_flux_defect_d(*net, *B.mesh, *B.N0, *B.N0, *w0);
        CellCorrector cc(*net, p.cell);
        const auto f = corrector_sources(*net, *w0, cc.as_term());
        w1 = std::make_shared<const GraphSolution>(solve_w1(*net, p.graph, *w0, f, d1));
        for (auto& B : nodes) B.N1 = std::make_shared<const NodeLayerSeries<Dim>>(build_node_series(*net, *B.mesh, *w1, p.node));
    }
    auto layers = make_outlet_layers(*net, *w0, w1.get());
    auto A = assemble_zero_order<Dim>(net, w0, std::move(nodes), std::move(layers), p.assembly);
    if (w1) {
        A.w1 = w1;
        A.u1 = std::make_shared<const CellProfile>(net, w0, p.cell);
    }
    return A;
}

// Values on a lattice: ny axial points per edge, nxi transverse points per axis, at the given times.
template <int Dim>
void write_lattice_csv(std::ostream& os, const Approximation<Dim>& A, int ny, int nxi, const std::vector<double>& times) {
    os << (Dim == 2 ? "t,edge_id,y,xi2,value\n" : "t,edge_id,y,xi2,xi3,value\n");
    for (double t : times)
        for (std::size_t e = 0; e < A.net->edges.size(); ++e) {
            const auto& E = A.net->edges[e];
            for (int i = 0; i < ny; ++i) {
                const double y = E.length * i / std::max(1, ny - 1);
                for (int a = 0; a < nxi; ++a)
                    for (int b = 0; b < (Dim == 2 ? 1 : nxi); ++b) {
                        const double x2 = nxi > 1 ? -E.h + 2 * E.h * a / (nxi - 1) : 0.0;
                        const double x3 = (Dim == 3 && nxi > 1) ? -E.h + 2 * E.h * b / (nxi - 1) : 0.0;
                        os << fmt17(t) << ',' << E.id << ',' << fmt17(y) << ',' << fmt17(x2) << ',';
                        if (Dim == 3) os << fmt17(x3) << ',';
                        os << fmt17(A.evaluate_edge(static_cast<int>(e), y, x2, x3, t)) << '\n';
                    }
            }
        }
}

}  // namespace thinnet
