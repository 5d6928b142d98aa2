#pragma once

// Direct finite-volume solver for the eps-dependent convection-diffusion problem on
// a planar thin junction (strips of width 2 eps h joined at a square node), and
// error functionals comparing it with an assembled approximation.
//
//   u_t - eps Lap u + div(V u) = 0,   -eps d_nu u + u V.nu = eps^alpha phi on walls,
//   u = q at the outer ends,  u(., 0) = 0.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <vector>

#include "assembler.hpp"
#include "errors.hpp"
#include "junction_mesh.hpp"
#include "network.hpp"
#include "node_elliptic.hpp"

namespace thinnet {

struct FullOptions {
    double eps = 0.1;
    double rho = 16.0;      // cells across the narrowest strip
    int nt = 400;
    double alpha = 1.0;
    double picard_tol = 1e-10;
    int picard_max = 30;
    double blowup = 1e6;
    int sample_every = 10;  // store every k-th time level
};

// Physical mesh: the unit-scale junction mesh scaled by eps, stubs ending at the outer ends.
class ThinMesh {
public:
    ThinMesh(const Network& net, double eps, double rho) : eps_(eps) {
        if (net.dim != 2) throw ConfigError("the direct solver works on planar networks");
        const auto iv = net.interior_vertices();
        if (iv.size() != 1) throw ConfigError("the direct solver handles networks with a single node");
        if (!(rho >= 8.0)) throw ConfigError("resolution factor must be at least 8");
        double hmin = INFINITY;
        for (auto& E : net.edges) hmin = std::min(hmin, E.h);
        const auto& V = net.vertices[iv[0]];
        std::vector<double> ends;
        for (auto& p : V.shape.ports) {
            const int e = net.edge_index(p.edge);
            for (int o : {net.vertex_index(net.edges[e].from), net.vertex_index(net.edges[e].to)})
                if (o != iv[0] && net.vertices[o].kind != VertexKind::outer) throw ConfigError("edge ends at a second node");
            ends.push_back(net.edges[e].length / eps);
        }
        unit_ = std::make_shared<const JunctionMesh<2>>(net, iv[0], 2.0 * hmin / rho, 8.0, ends);
    }

    double eps() const { return eps_; }
    double dx() const { return eps_ * unit_->spacing(); }
    int size() const { return unit_->size(); }
    const JunctionMesh<2>& unit() const { return *unit_; }
    std::shared_ptr<const JunctionMesh<2>> unit_ptr() const { return unit_; }

    std::array<double, 2> center(int c) const {
        auto p = unit_->center(c);
        return {eps_ * p[0], eps_ * p[1]};
    }
    // Unit-scale transverse coordinate of a stub cell.
    double xi_bar(int c) const {
        const auto& s = unit_->stubs()[unit_->region(c)];
        return unit_->center(c)[1 - s.axis];
    }
    double axial(int c) const { return eps_ * unit_->xi1(c); }

private:
    double eps_;
    std::shared_ptr<const JunctionMesh<2>> unit_;
};

struct FullSolution {
    std::shared_ptr<const ThinMesh> mesh;
    double dt = 0.0;
    std::vector<int> steps;                 // time level of each stored field
    std::vector<std::vector<double>> u;     // stored fields
    std::vector<double> mass;               // integral of u at every level
    std::vector<double> outflow;            // boundary flux integral of every step
    std::vector<int> picard;                // sub-iterations of every step
    double max_value = 0.0, min_value = 0.0;

    double time(int k) const { return steps[k] * dt; }

    // Largest |(mass change)/dt + outflow| relative to the largest term.
    double mass_balance_defect() const {
        double worst = 0.0, scale = 0.0;
        for (std::size_t n = 0; n + 1 < mass.size(); ++n) {
            const double rate = (mass[n + 1] - mass[n]) / dt;
            worst = std::max(worst, std::abs(rate + outflow[n]));
            scale = std::max({scale, std::abs(rate), std::abs(outflow[n])});
        }
        return scale > 0.0 ? worst / scale : worst;
    }
};

namespace detail {

inline double eval_vbar(const Network& net, int e, double y, double xi2, double t) {
    const auto& vb = net.velocity[e].vbar;
    if (vb.empty()) return 0.0;
    Vars x;
    x.y = y;
    x.t = t;
    x.x = {0.0, xi2, 0.0};
    return vb[0](x);
}

// Outward face velocities of every cell: node faces from the potential, axial stub faces
// from v1 at the face, transverse interior stub faces from eps * vbar.
inline FaceField<2> full_face_velocity(const Network& net, const ThinMesh& M, double t) {
    const auto& U = M.unit();
    auto face = solve_potential(U, port_velocities(net, U, t)).face;
    const double h = U.spacing();
    for (int c = 0; c < U.size(); ++c) {
        if (U.in_node(c)) continue;
        const auto& s = U.stubs()[U.region(c)];
        for (int d = 0; d < 4; ++d) {
            const int axis = d / 2, dir = (d % 2) ? 1 : -1;
            const int nb = U.neighbor(c, d);
            if (axis == s.axis) {
                const double y = M.eps() * (U.xi1(c) + dir * s.sign * 0.5 * h);
                const double u = dir * s.sign * net.v1(s.edge, y, t);
                face[c][d] = u;
                if (nb >= 0 && U.in_node(nb)) face[nb][d ^ 1] = -u;
            } else if (nb >= 0) {
                const double xi = M.xi_bar(c) + dir * 0.5 * h;
                // transverse coordinate increases with the mesh axis
                face[c][d] = dir * M.eps() * eval_vbar(net, s.edge, M.axial(c), xi, t);
            } else {
                face[c][d] = 0.0;
            }
        }
    }
    return face;
}

inline bool faces_equal(const FaceField<2>& a, const FaceField<2>& b) {
    for (std::size_t c = 0; c < a.size(); ++c)
        for (int d = 0; d < 4; ++d)
            if (std::abs(a[c][d] - b[c][d]) > 1e-14 * std::max(1.0, std::abs(a[c][d]))) return false;
    return true;
}

}  // namespace detail

// Total flux eps^alpha phi through a wall face of cell c.
inline double wall_flux(const Network& net, const ThinMesh& M, int c, int d, double u, double t, double alpha) {
    const auto& U = M.unit();
    const double w = std::pow(M.eps(), alpha);
    auto xi = U.center(c);
    xi[d / 2] += ((d % 2) ? 0.5 : -0.5) * U.spacing();
    if (U.in_node(c)) {
        const auto& phi0 = net.vertices[U.vertex()].phi0;
        if (!phi0) return 0.0;
        Vars x;
        x.s = u;
        x.t = t;
        x.x = {xi[0], xi[1], 0.0};
        return w * (*phi0)(x);
    }
    const auto& s = U.stubs()[U.region(c)];
    if (!net.nonlin[s.edge]) return 0.0;
    return w * net.phi(s.edge, u, M.axial(c), xi[1 - s.axis], 0.0, t);
}

inline bool has_wall_flux(const Network& net) {
    for (auto& n : net.nonlin)
        if (n) return true;
    for (auto& v : net.vertices)
        if (v.phi0) return true;
    return false;
}

inline FullSolution solve_full(const Network& net, const FullOptions& opt) {
    if (opt.nt < 1) throw ConfigError("need at least one time step");
    auto M = std::make_shared<const ThinMesh>(net, opt.eps, opt.rho);
    const auto& U = M->unit();
    const int n = U.size();
    const double dx = M->dx(), dt = net.T / opt.nt, eps = opt.eps;
    const bool nonlinear = has_wall_flux(net);

    FullSolution sol;
    sol.mesh = M;
    sol.dt = dt;

    std::vector<double> cur(n, 0.0), next(n, 0.0), rhs(n);
    sol.steps.push_back(0);
    sol.u.push_back(cur);
    sol.mass.push_back(0.0);

    auto faces = detail::full_face_velocity(net, *M, 0.0);
    bool steady = detail::faces_equal(faces, detail::full_face_velocity(net, *M, net.T)) &&
                  detail::faces_equal(faces, detail::full_face_velocity(net, *M, 0.5 * net.T));
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    Eigen::SparseMatrix<double> A(n, n);

    // Rows are divided by the face length dx.
    auto assemble = [&](const FaceField<2>& F) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * n);
        for (int c = 0; c < n; ++c) {
            double diag = dx / dt;
            for (int d = 0; d < 4; ++d) {
                const int nb = U.neighbor(c, d);
                const double v = F[c][d];
                if (nb >= 0) {
                    diag += eps / dx + std::max(v, 0.0);
                    trip.emplace_back(c, nb, -eps / dx + std::min(v, 0.0));
                } else if (nb == JunctionMesh<2>::cap) {
                    diag += 2.0 * eps / dx + std::max(v, 0.0);
                }
            }
            trip.emplace_back(c, c, diag);
        }
        A.setFromTriplets(trip.begin(), trip.end());
        lu.compute(A);
        if (lu.info() != Eigen::Success) throw NumericalError("factorization of the direct solver matrix failed");
    };
    assemble(faces);

    auto q_of = [&](int c, double t) { return net.q(U.stubs()[U.region(c)].edge, t); };

    for (int step = 1; step <= opt.nt; ++step) {
        const double t = step * dt;
        if (!steady) {
            faces = detail::full_face_velocity(net, *M, t);
            assemble(faces);
        }
        // data-dependent part of the right side
        std::vector<double> base(n);
        for (int c = 0; c < n; ++c) {
            double b = dx / dt * cur[c];
            for (int d = 0; d < 4; ++d)
                if (U.neighbor(c, d) == JunctionMesh<2>::cap) {
                    const double q = q_of(c, t);
                    b += 2.0 * eps / dx * q - std::min(faces[c][d], 0.0) * q;
                }
            base[c] = b;
        }
        Eigen::Map<Eigen::VectorXd> bv(rhs.data(), n);
        next = cur;
        int it = 0;
        for (;;) {
            ++it;
            for (int c = 0; c < n; ++c) {
                double b = base[c];
                if (nonlinear)
                    for (int d = 0; d < 4; ++d)
                        if (U.neighbor(c, d) == JunctionMesh<2>::wall) b -= wall_flux(net, *M, c, d, next[c], t, opt.alpha);
                rhs[c] = b;
            }
            Eigen::VectorXd x = lu.solve(bv);
            double change = 0.0, scale = 1.0;
            for (int c = 0; c < n; ++c) {
                change = std::max(change, std::abs(x[c] - next[c]));
                scale = std::max(scale, std::abs(x[c]));
                next[c] = x[c];
            }
            if (!nonlinear || change <= opt.picard_tol * scale) break;
            if (it >= opt.picard_max)
                throw NumericalError("wall-flux sub-iteration did not converge at t = " + fmt17(t), change / scale);
        }
        sol.picard.push_back(it);
        // boundary outflow with the converged state
        double out = 0.0, mass = 0.0;
        for (int c = 0; c < n; ++c) {
            if (!std::isfinite(next[c]) || std::abs(next[c]) > opt.blowup)
                throw NumericalError("solution blew up at t = " + fmt17(t), std::abs(next[c]));
            mass += next[c] * dx * dx;
            for (int d = 0; d < 4; ++d) {
                const int nb = U.neighbor(c, d);
                if (nb == JunctionMesh<2>::cap) {
                    const double q = q_of(c, t), v = faces[c][d];
                    out += dx * (2.0 * eps * (next[c] - q) / dx + (v > 0 ? v * next[c] : v * q));
                } else if (nb == JunctionMesh<2>::wall && nonlinear) {
                    out += dx * wall_flux(net, *M, c, d, next[c], t, opt.alpha);
                }
            }
        }
        sol.mass.push_back(mass);
        sol.outflow.push_back(out);
        cur.swap(next);
        for (double x : cur) {
            sol.max_value = std::max(sol.max_value, x);
            sol.min_value = std::min(sol.min_value, x);
        }
        if (step % std::max(1, opt.sample_every) == 0 || step == opt.nt) {
            sol.steps.push_back(step);
            sol.u.push_back(cur);
        }
    }
    return sol;
}

// Averages a solution on a mesh refined by two onto the coarse mesh (cells are nested).
inline std::vector<double> restrict_average(const ThinMesh& coarse, const ThinMesh& fine, const std::vector<double>& f) {
    const auto& C = coarse.unit();
    const auto& F = fine.unit();
    if (std::abs(F.spacing() * 2.0 - C.spacing()) > 1e-12 * C.spacing()) throw ConfigError("meshes are not nested by a factor two");
    std::vector<double> out(C.size(), 0.0);
    for (int c = 0; c < C.size(); ++c) {
        const auto I = C.index(c);
        double s = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const int k = F.find({2 * I[0] + a, 2 * I[1] + b});
                if (k < 0) throw GeometryError("fine mesh does not cover the coarse mesh");
                s += f[k];
            }
        out[c] = 0.25 * s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Error functionals

// Approximation evaluated at every cell centre of the direct mesh at time t.
inline std::vector<double> approximation_on_mesh(const Approximation<2>& A, const ThinMesh& M, double t) {
    const auto& U = M.unit();
    std::vector<double> out(U.size());
    for (int c = 0; c < U.size(); ++c) {
        if (U.in_node(c)) out[c] = A.evaluate_node(U.vertex(), U.center(c), t);
        else {
            const int e = U.stubs()[U.region(c)].edge;
            const double y = std::min(M.axial(c), A.net->edges[e].length);
            out[c] = A.evaluate_edge(e, y, M.xi_bar(c), 0.0, t);
        }
    }
    return out;
}

inline void check_same_eps(const FullSolution& full, const Approximation<2>& A) {
    if (std::abs(full.mesh->eps() - A.eps()) > 1e-14 * A.eps()) throw ConfigError("approximation and direct solution use different eps");
}

// Max over stored time levels and cell centres of |A - u|.
inline double error_max(const FullSolution& full, const Approximation<2>& A) {
    check_same_eps(full, A);
    double worst = 0.0;
    for (std::size_t k = 0; k < full.u.size(); ++k) {
        const auto a = approximation_on_mesh(A, *full.mesh, full.time(static_cast<int>(k)));
        for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a[c] - full.u[k][c]));
    }
    return worst;
}

// Squared gradient norm of a cell field integrated over the mesh; centred differences
// inside, one-sided next to walls and caps.
inline double gradient_energy(const ThinMesh& M, const std::vector<double>& f) {
    const auto& U = M.unit();
    const double dx = M.dx();
    double s = 0.0;
    for (int c = 0; c < U.size(); ++c) {
        double g2 = 0.0;
        for (int axis = 0; axis < 2; ++axis) {
            const int lo = U.neighbor(c, 2 * axis), hi = U.neighbor(c, 2 * axis + 1);
            double g = 0.0;
            if (lo >= 0 && hi >= 0) g = (f[hi] - f[lo]) / (2 * dx);
            else if (hi >= 0) g = (f[hi] - f[c]) / dx;
            else if (lo >= 0) g = (f[c] - f[lo]) / dx;
            g2 += g * g;
        }
        s += g2 * dx * dx;
    }
    return s;
}

// |Omega|^(-1/2) (int_0^T int |grad(A - u)|^2)^(1/2), trapezoidal in time over the stored levels.
inline double error_grad_l2(const FullSolution& full, const Approximation<2>& A) {
    check_same_eps(full, A);
    const auto& M = *full.mesh;
    const double area = M.size() * M.dx() * M.dx();
    std::vector<double> energy(full.u.size());
    for (std::size_t k = 0; k < full.u.size(); ++k) {
        auto a = approximation_on_mesh(A, M, full.time(static_cast<int>(k)));
        for (std::size_t c = 0; c < a.size(); ++c) a[c] -= full.u[k][c];
        energy[k] = gradient_energy(M, a);
    }
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < energy.size(); ++k)
        integral += 0.5 * (energy[k] + energy[k + 1]) * (full.time(static_cast<int>(k + 1)) - full.time(static_cast<int>(k)));
    return std::sqrt(integral / area);
}

// Field export: x1,x2,region,u at one stored level.
inline void write_full_csv(std::ostream& os, const FullSolution& s, int k, const Network& net) {
    const auto& U = s.mesh->unit();
    os << "x1,x2,region,u\n";
    for (int c = 0; c < U.size(); ++c) {
        const auto p = s.mesh->center(c);
        os << fmt17(p[0]) << ',' << fmt17(p[1]) << ',' << (U.in_node(c) ? -1 : net.edges[U.stubs()[U.region(c)].edge].id) << ','
           << fmt17(s.u[k][c]) << '\n';
    }
}

}  // namespace thinnet
