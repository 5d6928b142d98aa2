#pragma once

// Cell-centred pixel (2D) or voxel (3D) mesh of a junction: an axis-aligned node
// box with square stubs leaving through ports on its faces.

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "network.hpp"
#include "numerics.hpp"

namespace thinnet {

struct StubInfo {
    int edge = -1;       // edge index in the network
    int axis = 0;
    int sign = 1;
    double h = 0.25;     // half-width of the square cross-section
    double xi_end = 8.0; // coordinate along the stub axis of the far cap
};

template <int Dim>
class JunctionMesh {
    static_assert(Dim == 2 || Dim == 3);

public:
    static constexpr int dim = Dim;
    static constexpr int wall = -1;
    static constexpr int cap = -2;
    static constexpr int node_region = -1;

    using Index = std::array<int, Dim>;
    using Point = std::array<double, Dim>;

    JunctionMesh() = default;

    // Mesh of interior vertex v.  Stub caps sit at xi_1 = L_trunc unless `stub_end`
    // (indexed like the node's port list) overrides them.
    JunctionMesh(const Network& net, int v, double spacing, double L_trunc = 8.0, const std::vector<double>& stub_end = {})
        : delta_(spacing), vertex_(v) {
        const auto& V = net.vertices.at(v);
        if (V.kind != VertexKind::interior) throw GeometryError("junction mesh requested for an outer vertex");
        if (net.dim != Dim) throw GeometryError("junction mesh dimension does not match the network");
        ell0_ = V.shape.ell0;
        for (int k = 0; k < Dim; ++k) half_[k] = steps(V.shape.half_extent[k], "node half-extent");
        for (std::size_t p = 0; p < V.shape.ports.size(); ++p) {
            const auto& port = V.shape.ports[p];
            StubInfo s;
            s.edge = net.edge_index(port.edge);
            if (s.edge < 0) throw GeometryError("port references missing edge " + std::to_string(port.edge));
            if (port.axis >= Dim) throw GeometryError("port axis outside the mesh dimension");
            s.axis = port.axis;
            s.sign = port.sign;
            s.h = net.edges[s.edge].h;
            s.xi_end = stub_end.empty() ? L_trunc : stub_end.at(p);
            if (s.xi_end <= V.shape.half_extent[s.axis]) throw GeometryError("stub cap inside the node");
            stubs_.push_back(s);
        }
        build();
    }

    double spacing() const { return delta_; }
    double ell0() const { return ell0_; }
    int vertex() const { return vertex_; }
    int size() const { return static_cast<int>(cells_.size()); }
    double cell_volume() const { return std::pow(delta_, Dim); }
    double face_area() const { return std::pow(delta_, Dim - 1); }
    const std::vector<StubInfo>& stubs() const { return stubs_; }
    const Index& index(int c) const { return cells_[c]; }
    int region(int c) const { return region_[c]; }
    bool in_node(int c) const { return region_[c] == node_region; }
    // neighbour across direction d = 2 * axis + (sign > 0): a cell, wall or cap
    int neighbor(int c, int d) const { return nbr_[c][d]; }
    double node_half(int k) const { return half_[k] * delta_; }

    Point center(int c) const {
        Point p;
        for (int k = 0; k < Dim; ++k) p[k] = (cells_[c][k] + 0.5) * delta_;
        return p;
    }

    // Distance from the node centre along the stub axis.
    double xi1(int c) const {
        const auto& s = stubs_[region_[c]];
        return s.sign * center(c)[s.axis];
    }

    int stub_of_edge(int e) const {
        for (std::size_t k = 0; k < stubs_.size(); ++k)
            if (stubs_[k].edge == e) return static_cast<int>(k);
        return -1;
    }

    int find(const Index& i) const {
        auto it = lookup_.find(key(i));
        return it == lookup_.end() ? -1 : it->second;
    }

    int locate(const Point& x) const {
        Index i;
        for (int k = 0; k < Dim; ++k) i[k] = static_cast<int>(std::floor(x[k] / delta_));
        return find(i);
    }

    bool contains(const Point& x, double tol = 1e-12) const {
        if (locate(x) >= 0) return true;
        // points on the outer boundary belong to the closure of the mesh
        for (int k = 0; k < Dim; ++k)
            for (double s : {-1.0, 1.0}) {
                Point y = x;
                y[k] += s * tol * std::max(1.0, delta_);
                if (locate(y) >= 0) return true;
            }
        return false;
    }

    // Multilinear interpolation between cell centres; stencil cells outside the
    // mesh are dropped and the remaining weights renormalised.
    double sample(const std::vector<double>& f, const Point& x) const {
        Index base;
        Point frac;
        for (int k = 0; k < Dim; ++k) {
            const double u = x[k] / delta_ - 0.5;
            base[k] = static_cast<int>(std::floor(u));
            frac[k] = u - base[k];
        }
        double acc = 0.0, wsum = 0.0;
        for (int corner = 0; corner < (1 << Dim); ++corner) {
            Index i = base;
            double w = 1.0;
            for (int k = 0; k < Dim; ++k) {
                const int b = (corner >> k) & 1;
                i[k] += b;
                w *= b ? frac[k] : 1.0 - frac[k];
            }
            const int c = find(i);
            if (c < 0 || w == 0.0) continue;
            acc += w * f[c];
            wsum += w;
        }
        if (wsum > 1e-12) return acc / wsum;
        const int c = locate(x);
        if (c >= 0) return f[c];
        throw GeometryError("sample point outside the junction mesh");
    }

    // Field export: i,j[,k],region,value with region -1 for the node and the edge id on stubs.
    void write_csv(std::ostream& os, const std::vector<double>& f, const Network& net) const {
        os << (Dim == 2 ? "i,j,region,value\n" : "i,j,k,region,value\n");
        for (int c = 0; c < size(); ++c) {
            for (int k = 0; k < Dim; ++k) os << cells_[c][k] << ',';
            os << (in_node(c) ? -1 : net.edges[stubs_[region_[c]].edge].id) << ',' << fmt17(f[c]) << '\n';
        }
    }

private:
    static std::uint64_t key(const Index& i) {
        std::uint64_t k = 0;
        for (int d = 0; d < Dim; ++d) k = (k << 21) | static_cast<std::uint64_t>(i[d] + (1 << 20));
        return k;
    }

    int steps(double len, const char* what) const {
        const double n = len / delta_;
        const double r = std::round(n);
        if (std::abs(n - r) > 1e-9 * std::max(1.0, n) || r < 1)
            throw GeometryError(std::string(what) + " " + fmt17(len) + " is not a multiple of the spacing " + fmt17(delta_));
        return static_cast<int>(r);
    }

    void add_cell(const Index& i, int region) {
        const auto k = key(i);
        if (lookup_.count(k)) throw GeometryError("stubs overlap near the node");
        lookup_[k] = static_cast<int>(cells_.size());
        cells_.push_back(i);
        region_.push_back(region);
    }

    void build() {
        Index i{};
        // node box
        auto node_loop = [&](auto&& self, int k) -> void {
            if (k == Dim) {
                add_cell(i, node_region);
                return;
            }
            for (i[k] = -half_[k]; i[k] < half_[k]; ++i[k]) self(self, k + 1);
        };
        node_loop(node_loop, 0);
        for (std::size_t s = 0; s < stubs_.size(); ++s) {
            const auto& S = stubs_[s];
            const int A = half_[S.axis];
            if (steps(ell0_, "port offset") != A) throw GeometryError("port face must sit at l0 along its axis");
            const int H = steps(S.h, "stub half-width");
            const int Lc = steps(S.xi_end, "stub cap") - A;
            for (int k = 0; k < Dim; ++k)
                if (k != S.axis && H > half_[k]) throw GeometryError("port wider than the node face");
            auto loop = [&](auto&& self, int k) -> void {
                if (k == Dim) {
                    add_cell(i, static_cast<int>(s));
                    return;
                }
                if (k == S.axis) {
                    for (int a = 0; a < Lc; ++a) {
                        i[k] = S.sign > 0 ? A + a : -A - 1 - a;
                        self(self, k + 1);
                    }
                } else {
                    for (i[k] = -H; i[k] < H; ++i[k]) self(self, k + 1);
                }
            };
            loop(loop, 0);
        }
        nbr_.resize(cells_.size());
        for (std::size_t c = 0; c < cells_.size(); ++c)
            for (int d = 0; d < 2 * Dim; ++d) {
                Index j = cells_[c];
                j[d / 2] += (d % 2) ? 1 : -1;
                const int n = find(j);
                if (n >= 0) {
                    nbr_[c][d] = n;
                    continue;
                }
                nbr_[c][d] = wall;
                if (region_[c] != node_region) {
                    const auto& S = stubs_[region_[c]];
                    const int dir = (d % 2) ? 1 : -1;
                    if (d / 2 == S.axis && dir == S.sign) nbr_[c][d] = cap;
                }
            }
    }

    double delta_ = 1.0;
    int vertex_ = -1;
    double ell0_ = 0.25;
    Index half_{};
    std::vector<StubInfo> stubs_;
    std::vector<Index> cells_;
    std::vector<int> region_;
    std::vector<std::array<int, 2 * Dim>> nbr_;
    std::unordered_map<std::uint64_t, int> lookup_;
};

}  // namespace thinnet
