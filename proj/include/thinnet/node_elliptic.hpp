#pragma once

// Unit-scale junction problems: the node velocity potential, the node-layer field
// N on the truncated junction, its decay along the stubs, and the vertex flux
// defects d that drive the corrector Kirchhoff sums.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutoff.hpp"
#include "errors.hpp"
#include "graph_limit.hpp"
#include "junction_mesh.hpp"
#include "network.hpp"
#include "numerics.hpp"
#include "projected_cg.hpp"

namespace thinnet {

template <int Dim>
using FaceField = std::vector<std::array<double, 2 * Dim>>;

// Outward velocity of each stub at the node, in mesh stub order.
template <int Dim>
std::vector<double> port_velocities(const Network& net, const JunctionMesh<Dim>& mesh, double t) {
    std::vector<double> out;
    for (auto& s : mesh.stubs()) out.push_back(net.vertex_velocity(mesh.vertex(), s.edge, t));
    return out;
}

// Number of cell faces in each port.
template <int Dim>
std::vector<int> port_face_counts(const JunctionMesh<Dim>& mesh) {
    std::vector<int> n(mesh.stubs().size(), 0);
    for (int c = 0; c < mesh.size(); ++c) {
        if (!mesh.in_node(c)) continue;
        for (int d = 0; d < 2 * Dim; ++d) {
            const int nb = mesh.neighbor(c, d);
            if (nb >= 0 && !mesh.in_node(nb)) ++n[mesh.region(nb)];
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Potential

template <int Dim>
struct PotentialField {
    std::vector<double> p;  // on all mesh cells; zero outside the node
    FaceField<Dim> face;    // outward face velocity of every cell (node, ports, stubs)
    double mean = 0.0;
    int iterations = 0;

    // Discrete divergence of the face field in cell c.
    double divergence(const JunctionMesh<Dim>& mesh, int c) const {
        double s = 0.0;
        for (int d = 0; d < 2 * Dim; ++d) s += face[c][d];
        return s * mesh.face_area() / mesh.cell_volume();
    }

    double max_divergence(const JunctionMesh<Dim>& mesh) const {
        double m = 0.0;
        for (int c = 0; c < mesh.size(); ++c) m = std::max(m, std::abs(divergence(mesh, c)));
        return m;
    }
};

struct PotentialOptions {
    double tol = 1e-12;
    int max_iter = 50000;
    double compat_tol = 1e-10;
};

// Neumann Laplace problem on the node: flux v_i through port i, none through the walls.
template <int Dim>
PotentialField<Dim> solve_potential(const JunctionMesh<Dim>& mesh, const std::vector<double>& port_v, const PotentialOptions& opt = {}) {
    const auto counts = port_face_counts(mesh);
    double bal = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < port_v.size(); ++k) {
        bal += port_v[k] * counts[k];
        scale += std::abs(port_v[k] * counts[k]);
    }
    if (std::abs(bal) > opt.compat_tol * std::max(scale, 1.0))
        throw CompatibilityError("potential problem has no solution: port fluxes unbalanced by " +
                                 fmt17(bal * mesh.face_area()));

    std::vector<int> local(mesh.size(), -1), cells;
    for (int c = 0; c < mesh.size(); ++c)
        if (mesh.in_node(c)) {
            local[c] = static_cast<int>(cells.size());
            cells.push_back(c);
        }
    const int n = static_cast<int>(cells.size());
    const double dx = mesh.spacing();
    // (L p)_c = sum over node neighbours (p_c - p_nb);  L p = dx * (port outflow)
    std::vector<double> rhs(n, 0.0), diag(n, 0.0);
    for (int a = 0; a < n; ++a) {
        const int c = cells[a];
        for (int d = 0; d < 2 * Dim; ++d) {
            const int nb = mesh.neighbor(c, d);
            if (nb < 0) continue;
            if (mesh.in_node(nb)) diag[a] += 1.0;
            else rhs[a] += dx * port_v[mesh.region(nb)];
        }
    }
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        y.assign(n, 0.0);
        for (int a = 0; a < n; ++a) {
            const int c = cells[a];
            for (int d = 0; d < 2 * Dim; ++d) {
                const int nb = mesh.neighbor(c, d);
                if (nb >= 0 && local[nb] >= 0) y[a] += x[a] - x[local[nb]];
            }
        }
    };
    std::vector<double> p;
    PotentialField<Dim> out;
    out.iterations = projected_cg(apply, diag, rhs, p, opt.tol, opt.max_iter);
    double m = 0.0;
    for (double x : p) m += x;
    m /= n;
    out.p.assign(mesh.size(), 0.0);
    for (int a = 0; a < n; ++a) out.p[cells[a]] = p[a] - m;

    out.face.assign(mesh.size(), {});
    for (int c = 0; c < mesh.size(); ++c)
        for (int d = 0; d < 2 * Dim; ++d) {
            const int nb = mesh.neighbor(c, d);
            const int axis = d / 2, dir = (d % 2) ? 1 : -1;
            double u = 0.0;
            if (nb == JunctionMesh<Dim>::wall) u = 0.0;
            else if (mesh.in_node(c) && nb >= 0 && mesh.in_node(nb)) u = (out.p[nb] - out.p[c]) / dx;
            else {
                // port or stub face: axial flow at the stub speed
                const int k = mesh.in_node(c) ? mesh.region(nb) : mesh.region(c);
                const auto& s = mesh.stubs()[k];
                if (axis == s.axis) u = dir * s.sign * port_v[k];
            }
            out.face[c][d] = u;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Node layer

struct NodeLayerOptions {
    double kirchhoff_tol = 1e-8;
    double tol = 1e-10;                 // iterative solver tolerance
    int direct_limit = 400000;          // use SparseLU below this many cells
    double fit_start_offset = 1.0;      // decay fit window starts at l0 + offset
    double fit_end_margin = 2.0;        // and ends this far before the cap
};

// Upwind convection-diffusion operator -Lap N + V.grad N with Dirichlet caps.
template <int Dim>
class NodeLayerOperator {
public:
    NodeLayerOperator(const JunctionMesh<Dim>& mesh, const FaceField<Dim>& face, const NodeLayerOptions& opt = {})
        : mesh_(&mesh), opt_(opt) {
        const int n = mesh.size();
        const double dx = mesh.spacing();
        std::vector<Eigen::Triplet<double>> trip;
        cap_.assign(mesh.stubs().size(), Eigen::VectorXd::Zero(n));
        for (int c = 0; c < n; ++c) {
            double diag = 0.0;
            for (int d = 0; d < 2 * Dim; ++d) {
                const int nb = mesh.neighbor(c, d);
                if (nb == JunctionMesh<Dim>::wall) continue;
                const double u = face[c][d];
                const double inflow = u < 0.0 ? -u : 0.0;
                if (nb >= 0) {
                    const double w = 1.0 / dx + inflow;
                    diag += w;
                    trip.emplace_back(c, nb, -w);
                } else {
                    const double w = 2.0 / dx + inflow;
                    diag += w;
                    cap_[mesh.region(c)][c] += w;
                }
            }
            trip.emplace_back(c, c, diag);
        }
        A_.resize(n, n);
        A_.setFromTriplets(trip.begin(), trip.end());
        A_.makeCompressed();
        if (n <= opt.direct_limit) {
            lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            lu_->analyzePattern(A_);
            lu_->factorize(A_);
            if (lu_->info() != Eigen::Success) throw NumericalError("node layer factorization failed");
        } else {
            it_ = std::make_unique<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>>();
            it_->setTolerance(opt.tol);
            it_->preconditioner().setDroptol(1e-4);
            it_->compute(A_);
        }
    }

    const JunctionMesh<Dim>& mesh() const { return *mesh_; }

    std::vector<double> solve(const std::vector<double>& targets) const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh_->size());
        for (std::size_t k = 0; k < targets.size(); ++k) b += targets[k] * cap_[k];
        Eigen::VectorXd x;
        if (lu_) x = lu_->solve(b);
        else {
            x = it_->solve(b);
            if (it_->info() != Eigen::Success) throw NumericalError("node layer iteration did not converge", it_->error());
        }
        return std::vector<double>(x.data(), x.data() + x.size());
    }

    // Responses to unit data on each cap; any solution is their combination.
    std::vector<std::vector<double>> basis() const {
        std::vector<std::vector<double>> out;
        for (std::size_t k = 0; k < cap_.size(); ++k) {
            std::vector<double> t(cap_.size(), 0.0);
            t[k] = 1.0;
            out.push_back(solve(t));
        }
        return out;
    }

private:
    const JunctionMesh<Dim>* mesh_;
    NodeLayerOptions opt_;
    Eigen::SparseMatrix<double> A_;
    std::vector<Eigen::VectorXd> cap_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
    std::unique_ptr<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>> it_;
};

template <int Dim>
struct NodeSolution {
    const JunctionMesh<Dim>* mesh = nullptr;
    double t = 0.0;
    std::vector<double> N;
    std::vector<double> targets;  // per stub
    std::vector<double> beta;     // fitted decay rate per stub (NaN when not measurable)
    double kirchhoff_defect = 0.0;
    bool kirchhoff_warning = false;
    double cap_mismatch = 0.0;    // max |N - target| over cells touching a cap

    double min() const { return *std::min_element(N.begin(), N.end()); }
    double max() const { return *std::max_element(N.begin(), N.end()); }
};

// Exponential rate of max |N - target| along each stub, fitted over the decay window.
template <int Dim>
std::vector<double> fit_decay(const JunctionMesh<Dim>& mesh, const std::vector<double>& N, const std::vector<double>& targets,
                              const NodeLayerOptions& opt = {}) {
    std::vector<double> beta;
    for (std::size_t k = 0; k < mesh.stubs().size(); ++k) {
        const auto& s = mesh.stubs()[k];
        const double lo = mesh.ell0() + opt.fit_start_offset, hi = s.xi_end - opt.fit_end_margin;
        std::map<long, double> layer;  // keyed by axial cell index
        for (int c = 0; c < mesh.size(); ++c) {
            if (mesh.region(c) != static_cast<int>(k)) continue;
            const double x = mesh.xi1(c);
            if (x < lo || x > hi) continue;
            auto& m = layer[std::lround(x / mesh.spacing())];
            m = std::max(m, std::abs(N[c] - targets[k]));
        }
        std::vector<double> xs, ys;
        double peak = 0.0;
        for (auto& [i, m] : layer) peak = std::max(peak, m);
        for (auto& [i, m] : layer)
            if (m > 1e-13 * std::max(1.0, peak) && m > 1e-300) {
                xs.push_back(i * mesh.spacing());
                ys.push_back(std::log(m));
            }
        beta.push_back(xs.size() >= 3 ? -least_squares_line(xs, ys).slope : std::numeric_limits<double>::quiet_NaN());
    }
    return beta;
}

template <int Dim>
double kirchhoff_defect_of_targets(const Network& net, const JunctionMesh<Dim>& mesh, const std::vector<double>& targets, double t) {
    double s = 0.0;
    const auto v = port_velocities(net, mesh, t);
    for (std::size_t k = 0; k < targets.size(); ++k) s += net.omega(mesh.stubs()[k].edge) * v[k] * targets[k];
    return s;
}

template <int Dim>
NodeSolution<Dim> finish_node_solution(const Network& net, const JunctionMesh<Dim>& mesh, std::vector<double> N,
                                       const std::vector<double>& targets, double t, const NodeLayerOptions& opt) {
    NodeSolution<Dim> sol;
    sol.mesh = &mesh;
    sol.t = t;
    sol.N = std::move(N);
    sol.targets = targets;
    sol.beta = fit_decay(mesh, sol.N, targets, opt);
    sol.kirchhoff_defect = kirchhoff_defect_of_targets(net, mesh, targets, t);
    double scale = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) scale += net.omega(mesh.stubs()[k].edge) * std::abs(targets[k]);
    sol.kirchhoff_warning = std::abs(sol.kirchhoff_defect) > opt.kirchhoff_tol * std::max(scale, 1.0);
    for (int c = 0; c < mesh.size(); ++c)
        for (int d = 0; d < 2 * Dim; ++d)
            if (mesh.neighbor(c, d) == JunctionMesh<Dim>::cap)
                sol.cap_mismatch = std::max(sol.cap_mismatch, std::abs(sol.N[c] - targets[mesh.region(c)]));
    return sol;
}

// Steady node-layer problem at time t with far targets per stub.
template <int Dim>
NodeSolution<Dim> solve_node_layer(const Network& net, const JunctionMesh<Dim>& mesh, const std::vector<double>& targets, double t,
                                   const NodeLayerOptions& opt = {}) {
    const auto pot = solve_potential(mesh, port_velocities(net, mesh, t));
    NodeLayerOperator<Dim> op(mesh, pot.face, opt);
    return finish_node_solution(net, mesh, op.solve(targets), targets, t, opt);
}

// ---------------------------------------------------------------------------
// Time series of node layers on the graph time grid

template <int Dim>
struct NodeLayerSeries {
    const JunctionMesh<Dim>* mesh = nullptr;
    double dt = 1.0;
    int nt = 0;
    std::vector<TimeSeries> targets;            // per stub
    bool steady = true;
    std::vector<std::vector<double>> basis;     // steady velocity: N(t) = sum targets_k(t) basis_k
    std::vector<std::vector<double>> fields;    // otherwise one field per time level
    double max_kirchhoff_defect = 0.0;

    double value(int c, int n) const {
        if (!steady) return fields[n][c];
        double s = 0.0;
        for (std::size_t k = 0; k < basis.size(); ++k) s += targets[k].values[n] * basis[k][c];
        return s;
    }

    std::vector<double> field(int n) const {
        std::vector<double> f(mesh->size());
        for (int c = 0; c < mesh->size(); ++c) f[c] = value(c, n);
        return f;
    }

    // Time derivative: exact combination of target derivatives in steady mode, centred differences otherwise.
    std::vector<double> time_derivative(int n) const {
        std::vector<double> f(mesh->size(), 0.0);
        if (steady) {
            for (std::size_t k = 0; k < basis.size(); ++k) {
                const double d = targets[k].derivative_at(n);
                for (int c = 0; c < mesh->size(); ++c) f[c] += d * basis[k][c];
            }
            return f;
        }
        const int a = n == 0 ? 0 : (n == nt ? nt - 2 : n - 1);
        for (int c = 0; c < mesh->size(); ++c) {
            if (n == 0) f[c] = (-3 * fields[0][c] + 4 * fields[1][c] - fields[2][c]) / (2 * dt);
            else if (n == nt) f[c] = (3 * fields[nt][c] - 4 * fields[nt - 1][c] + fields[nt - 2][c]) / (2 * dt);
            else f[c] = (fields[n + 1][c] - fields[a][c]) / (2 * dt);
        }
        return f;
    }

    // Value at mesh point xi and time t (linear in t).
    double sample(const typename JunctionMesh<Dim>::Point& xi, double t) const {
        if (t <= 0.0) return sample_level(xi, 0);
        const double u = std::min(t / dt, static_cast<double>(nt));
        const int n = std::min(static_cast<int>(u), nt - 1);
        const double f = u - n;
        return (1 - f) * sample_level(xi, n) + f * sample_level(xi, n + 1);
    }

    double sample_level(const typename JunctionMesh<Dim>::Point& xi, int n) const {
        if (steady) {
            double s = 0.0;
            for (std::size_t k = 0; k < basis.size(); ++k) s += targets[k].values[n] * mesh->sample(basis[k], xi);
            return s;
        }
        return mesh->sample(fields[n], xi);
    }
};

// Node layers for vertex traces of a graph level, on that level's time grid.
template <int Dim>
NodeLayerSeries<Dim> build_node_series(const Network& net, const JunctionMesh<Dim>& mesh, const GraphSolution& level,
                                       const NodeLayerOptions& opt = {}) {
    NodeLayerSeries<Dim> S;
    S.mesh = &mesh;
    for (auto& st : mesh.stubs()) S.targets.push_back(level.trace(mesh.vertex(), st.edge));
    S.nt = static_cast<int>(S.targets.front().values.size()) - 1;
    S.dt = S.targets.front().dt;
    const auto v0 = port_velocities(net, mesh, 0.0);
    for (int n = 0; n <= S.nt && S.steady; ++n) {
        const auto v = port_velocities(net, mesh, n * S.dt);
        for (std::size_t k = 0; k < v.size(); ++k)
            if (std::abs(v[k] - v0[k]) > 1e-14 * std::max(1.0, std::abs(v0[k]))) S.steady = false;
    }
    std::vector<double> tg(S.targets.size());
    for (int n = 0; n <= S.nt; ++n) {
        for (std::size_t k = 0; k < tg.size(); ++k) tg[k] = S.targets[k].values[n];
        S.max_kirchhoff_defect = std::max(S.max_kirchhoff_defect, std::abs(kirchhoff_defect_of_targets(net, mesh, tg, n * S.dt)));
    }
    if (S.steady) {
        const auto pot = solve_potential(mesh, v0);
        S.basis = NodeLayerOperator<Dim>(mesh, pot.face, opt).basis();
    } else {
        for (int n = 0; n <= S.nt; ++n) {
            for (std::size_t k = 0; k < tg.size(); ++k) tg[k] = S.targets[k].values[n];
            const auto pot = solve_potential(mesh, port_velocities(net, mesh, n * S.dt));
            S.fields.push_back(NodeLayerOperator<Dim>(mesh, pot.face, opt).solve(tg));
        }
    }
    return S;
}

template <int Dim>
void write_decay_json(std::ostream& os, const Network& net, const NodeSolution<Dim>& sol) {
    auto num = [](double x) { return std::isfinite(x) ? fmt17(x) : std::string("null"); };
    os << "{\n  \"t\": " << num(sol.t) << ",\n  \"kirchhoff_defect\": " << num(sol.kirchhoff_defect)
       << ",\n  \"kirchhoff_warning\": " << (sol.kirchhoff_warning ? "true" : "false") << ",\n  \"cap_mismatch\": " << num(sol.cap_mismatch)
       << ",\n  \"stubs\": [";
    for (std::size_t k = 0; k < sol.beta.size(); ++k)
        os << (k ? ", " : "") << "{\"edge_id\": " << net.edges[sol.mesh->stubs()[k].edge].id << ", \"target\": " << num(sol.targets[k])
           << ", \"beta\": " << num(sol.beta[k]) << "}";
    os << "]\n}\n";
}

// ---------------------------------------------------------------------------
// Solvability bookkeeping

template <int Dim>
double node_volume(const JunctionMesh<Dim>& mesh) {
    double v = 0.0;
    for (int c = 0; c < mesh.size(); ++c)
        if (mesh.in_node(c)) v += mesh.cell_volume();
    return v;
}

// Wall faces of the node cells (the node boundary minus the ports): calls f(face centre).
template <int Dim, class F>
void for_each_node_wall_face(const JunctionMesh<Dim>& mesh, F&& f) {
    for (int c = 0; c < mesh.size(); ++c) {
        if (!mesh.in_node(c)) continue;
        for (int d = 0; d < 2 * Dim; ++d) {
            if (mesh.neighbor(c, d) != JunctionMesh<Dim>::wall) continue;
            auto x = mesh.center(c);
            x[d / 2] += ((d % 2) ? 0.5 : -0.5) * mesh.spacing();
            f(c, x);
        }
    }
}

template <int Dim>
double node_wall_measure(const JunctionMesh<Dim>& mesh) {
    double m = 0.0;
    for_each_node_wall_face(mesh, [&](int, const auto&) { m += mesh.face_area(); });
    return m;
}

// Integral of F0 over the node plus the stub integrals of Fi minus the node-wall integral of Psi0.
template <int Dim>
double junction_solvability_defect(const JunctionMesh<Dim>& mesh,
                                   const std::function<double(const typename JunctionMesh<Dim>::Point&)>& F0,
                                   const std::function<double(int, const typename JunctionMesh<Dim>::Point&)>& Fi,
                                   const std::function<double(const typename JunctionMesh<Dim>::Point&)>& Psi0) {
    double s = 0.0;
    for (int c = 0; c < mesh.size(); ++c) {
        const auto x = mesh.center(c);
        s += (mesh.in_node(c) ? (F0 ? F0(x) : 0.0) : (Fi ? Fi(mesh.region(c), x) : 0.0)) * mesh.cell_volume();
    }
    if (Psi0) for_each_node_wall_face(mesh, [&](int, const auto& x) { s -= Psi0(x) * mesh.face_area(); });
    return s;
}

// Port area divided by the Kirchhoff weight: 2 for strips, 4 for square ports.
template <int Dim>
double cross_section_ratio() {
    return Dim == 2 ? 2.0 : 4.0;
}

// Flux defect d(t) on the series time grid:
//   -(1/k) [ node-wall integral of phi0(N_phi) + node integral of dN_prev/dt + stub integrals of dN~_prev/dt ]
//   + sum_i omega_i d_y w_prev(0,t) (1 - v_i I_chi),
// with k the cross-section ratio and N~ = N - w(0,t) chi on each stub.
template <int Dim>
TimeSeries compute_flux_defect_d(const Network& net, const JunctionMesh<Dim>& mesh, const NodeLayerSeries<Dim>& N_phi,
                                 const NodeLayerSeries<Dim>& N_prev, const GraphSolution& w_prev) {
    const int v = mesh.vertex();
    const auto& V = net.vertices[v];
    const NodeCutoff chi{mesh.ell0()};
    const double I_chi = chi.first_moment();
    const double kappa = cross_section_ratio<Dim>();
    const int nt = N_prev.nt;
    if (N_phi.nt != nt) throw ConfigError("node series on different time grids");
    std::vector<double> chi_cell(mesh.size(), 0.0);
    for (int c = 0; c < mesh.size(); ++c)
        if (!mesh.in_node(c)) chi_cell[c] = chi(mesh.xi1(c));

    // outward y-derivative of w_prev at the vertex, by one-sided 5-point differences
    std::vector<std::vector<double>> dwdy(mesh.stubs().size(), std::vector<double>(nt + 1, 0.0));
    for (std::size_t k = 0; k < mesh.stubs().size(); ++k) {
        const int e = mesh.stubs()[k].edge;
        const auto& W = w_prev.edges[e];
        const auto& g = W.grid;
        if (g.nt != nt) throw ConfigError("graph level and node series on different time grids");
        const bool start = net.edge_starts_at(v, e);
        const auto wts = fd_weights(0.0, {0, 1, 2, 3, 4}, 1);
        for (int n = 0; n <= nt; ++n) {
            double d = 0.0;
            for (int i = 0; i < 5; ++i) d += wts[i] * W.at(start ? i : g.nx - i, n);
            dwdy[k][n] = d / g.dx();  // derivative along the direction pointing away from the vertex
        }
    }

    std::vector<double> out(nt + 1);
    const double vol = mesh.cell_volume();
    for (int n = 0; n <= nt; ++n) {
        const double t = n * N_prev.dt;
        double integral = 0.0;
        if (V.phi0) {
            Vars x;
            x.t = t;
            for_each_node_wall_face(mesh, [&](int c, const auto& p) {
                x.s = N_phi.value(c, n);
                x.x = {0.0, 0.0, 0.0};
                for (int a = 0; a < Dim; ++a) x.x[a] = p[a];
                integral += (*V.phi0)(x) * mesh.face_area();
            });
        }
        const auto dN = N_prev.time_derivative(n);
        std::vector<double> dw(mesh.stubs().size());
        for (std::size_t k = 0; k < dw.size(); ++k) dw[k] = N_prev.targets[k].derivative_at(n);
        for (int c = 0; c < mesh.size(); ++c) {
            if (mesh.in_node(c)) integral += dN[c] * vol;
            else integral += (dN[c] - dw[mesh.region(c)] * chi_cell[c]) * vol;
        }
        double d = -integral / kappa;
        const auto pv = port_velocities(net, mesh, t);
        for (std::size_t k = 0; k < mesh.stubs().size(); ++k)
            d += net.omega(mesh.stubs()[k].edge) * dwdy[k][n] * (1.0 - pv[k] * I_chi);
        out[n] = d;
    }
    return TimeSeries(N_prev.dt, std::move(out));
}

}  // namespace thinnet
