#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "thinnet/node_elliptic.hpp"

using namespace thinnet;
using namespace thinnet::testing;

namespace {

// Straight 2D channel whose node is as wide as the stubs.
Network straight_channel(double v = 1.0) {
    return network_from_json(star_json({0.25, 0.25}, {-v, v}, {"-x", "+x"}, 2.0, 2, 0.25, {0.25, 0.25, 0.25}));
}

Network tee(std::vector<double> v) {
    return network_from_json(star_json({0.25, 0.25, 0.25}, v, {"-x", "+x", "+y"}, 1.0, 2));
}

GraphSolution zero_level(const Network& net, const GraphGrid& gg, int vertex) {
    GraphSolution g;
    VertexTraces vt;
    vt.vertex = vertex;
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        g.edges.emplace_back(gg.edge_grid(net, static_cast<int>(e)));
        vt.edges.push_back(static_cast<int>(e));
        vt.traces.emplace_back(net.T / gg.nt, std::vector<double>(gg.nt + 1, 0.0));
    }
    g.vertices.push_back(vt);
    return g;
}

}  // namespace

TEST(JunctionMesh, ChannelGeometry) {
    auto net = straight_channel();
    JunctionMesh<2> m(net, 0, 1.0 / 16, 8.0);
    // node 8 x 8, two stubs of (8 - 0.25) * 16 axial by 8 transverse cells
    EXPECT_EQ(m.size(), 64 + 2 * 124 * 8);
    int caps = 0, walls = 0;
    for (int c = 0; c < m.size(); ++c)
        for (int d = 0; d < 4; ++d) {
            caps += m.neighbor(c, d) == JunctionMesh<2>::cap;
            walls += m.neighbor(c, d) == JunctionMesh<2>::wall;
        }
    EXPECT_EQ(caps, 16);
    EXPECT_EQ(walls, 2 * (8 + 2 * 124));
    EXPECT_EQ(m.stub_of_edge(1), 1);
    const int c = m.locate({7.9, 0.01});
    ASSERT_GE(c, 0);
    EXPECT_EQ(m.region(c), 1);
    EXPECT_NEAR(m.xi1(c), 7.90625, 1e-12);
}

TEST(JunctionMesh, RejectsIncommensurateSpacing) {
    auto net = straight_channel();
    EXPECT_THROW(JunctionMesh<2>(net, 0, 0.1, 8.0), GeometryError);
    EXPECT_THROW(JunctionMesh<2>(net, 1, 1.0 / 16), GeometryError);
}

TEST(JunctionMesh, SamplesLinearFieldExactly) {
    auto net = straight_channel();
    JunctionMesh<2> m(net, 0, 1.0 / 8, 4.0);
    std::vector<double> f(m.size());
    for (int c = 0; c < m.size(); ++c) f[c] = 2.0 * m.center(c)[0] - m.center(c)[1];
    EXPECT_NEAR(m.sample(f, {1.3, 0.07}), 2.6 - 0.07, 1e-12);
    EXPECT_NEAR(m.sample(f, {-0.11, -0.05}), -0.22 + 0.05, 1e-12);
}

TEST(Cutoff, ProfileAndMoment) {
    NodeCutoff chi{0.25};
    EXPECT_EQ(chi(0.5), 0.0);
    EXPECT_EQ(chi(0.75), 1.0);
    EXPECT_NEAR(chi(0.625), 0.5, 1e-15);
    EXPECT_NEAR(chi.first_moment(), 2.5 * 0.25, 1e-14);
    // derivative integrates to one
    double s = 0.0;
    for (int k = 0; k < 1000; ++k) s += chi(0.5 + 0.25 * (k + 0.5) / 1000, 1) * 0.25 / 1000;
    EXPECT_NEAR(s, 1.0, 1e-6);
    OutletCutoff out{1.0, 0.1};
    EXPECT_EQ(out(0.8), 0.0);
    EXPECT_NEAR(out(0.9), 1.0, 1e-12);
    EXPECT_EQ(out(0.95), 1.0);
}

TEST(Potential, LinearInStraightChannel) {
    auto net = straight_channel(1.5);
    JunctionMesh<2> m(net, 0, 1.0 / 16, 4.0);
    auto pot = solve_potential(m, port_velocities(net, m, 0.3));
    double err = 0.0;
    for (int c = 0; c < m.size(); ++c)
        if (m.in_node(c)) err = std::max(err, std::abs(pot.p[c] - 1.5 * m.center(c)[0]));
    EXPECT_LE(err, 1e-8);
    EXPECT_LE(pot.max_divergence(m), 1e-9);
}

TEST(Potential, ZeroPortsGiveZero) {
    auto net = straight_channel();
    JunctionMesh<2> m(net, 0, 1.0 / 16, 4.0);
    auto pot = solve_potential(m, {0.0, 0.0});
    for (double p : pot.p) EXPECT_EQ(p, 0.0);
}

TEST(Potential, TeeJunctionIsDivergenceFree) {
    auto net = tee({-1.0, 0.5, 0.5});
    JunctionMesh<2> m(net, 0, 1.0 / 16, 4.0);
    auto pot = solve_potential(m, port_velocities(net, m, 0.0));
    EXPECT_LE(pot.max_divergence(m), 1e-9);
    EXPECT_GT(pot.iterations, 0);
    EXPECT_THROW(solve_potential(m, {-1.0, 1.0, 1.0}), CompatibilityError);
}

TEST(Potential, ThreeDimensionalTee) {
    auto net = network_from_json(star_json({0.25, 0.25, 0.25}, {-1.0, 0.5, 0.5}, {"-x", "+x", "+z"}, 1.0, 3));
    JunctionMesh<3> m(net, 0, 1.0 / 8, 2.0);
    auto pot = solve_potential(m, port_velocities(net, m, 0.0));
    EXPECT_LE(pot.max_divergence(m), 1e-9);
}

TEST(NodeLayer, ConstantTargetsGiveConstant) {
    auto net = tee({-1.0, 0.5, 0.5});
    JunctionMesh<2> m(net, 0, 1.0 / 16, 6.0);
    auto s = solve_node_layer(net, m, {2.5, 2.5, 2.5}, 0.0);
    for (double x : s.N) EXPECT_NEAR(x, 2.5, 1e-10);
    EXPECT_FALSE(s.kirchhoff_warning);
    auto z = solve_node_layer(net, m, {0.0, 0.0, 0.0}, 0.0);
    for (double x : z.N) EXPECT_EQ(x, 0.0);
}

TEST(NodeLayer, MaximumPrinciple) {
    auto net = tee({-1.0, 0.25, 0.75});
    JunctionMesh<2> m(net, 0, 1.0 / 16, 5.0);
    auto pot = solve_potential(m, port_velocities(net, m, 0.0));
    NodeLayerOperator<2> op(m, pot.face);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> t{U(rng), U(rng), U(rng)};
        const auto N = op.solve(t);
        const double lo = *std::min_element(t.begin(), t.end()), hi = *std::max_element(t.begin(), t.end());
        for (double x : N) {
            EXPECT_GE(x, lo - 1e-12);
            EXPECT_LE(x, hi + 1e-12);
        }
    }
}

TEST(NodeLayer, BasisSuperposition) {
    auto net = tee({-1.0, 0.5, 0.5});
    JunctionMesh<2> m(net, 0, 1.0 / 8, 4.0);
    auto pot = solve_potential(m, port_velocities(net, m, 0.0));
    NodeLayerOperator<2> op(m, pot.face);
    const auto B = op.basis();
    const std::vector<double> t{0.3, -1.2, 2.0};
    const auto N = op.solve(t);
    for (int c = 0; c < m.size(); ++c) EXPECT_NEAR(N[c], t[0] * B[0][c] + t[1] * B[1][c] + t[2] * B[2][c], 1e-12);
}

TEST(NodeLayer, ChannelDecayMatchesSpeed) {
    // targets (0, 1) break the Kirchhoff balance: the warning fires, and the inlet
    // deviation decays at the stub speed
    for (double v : {1.0, 2.0}) {
        auto net = straight_channel(v);
        JunctionMesh<2> m(net, 0, 1.0 / 16, 8.0);
        auto s = solve_node_layer(net, m, {0.0, 1.0}, 0.0);
        EXPECT_TRUE(s.kirchhoff_warning);
        EXPECT_NEAR(s.kirchhoff_defect, 0.25 * v, 1e-14);
        ASSERT_TRUE(std::isfinite(s.beta[0]));
        EXPECT_NEAR(s.beta[0], v, 0.1 * v);
        EXPECT_LE(s.cap_mismatch, 1.0);
        std::ostringstream os;
        write_decay_json(os, net, s);
        EXPECT_NE(os.str().find("\"beta\""), std::string::npos);
    }
}

TEST(NodeLayer, DecayStableUnderLongerStubs) {
    auto net = straight_channel(1.0);
    JunctionMesh<2> a(net, 0, 1.0 / 16, 8.0), b(net, 0, 1.0 / 16, 16.0);
    auto sa = solve_node_layer(net, a, {0.0, 1.0}, 0.0);
    auto sb = solve_node_layer(net, b, {0.0, 1.0}, 0.0);
    EXPECT_NEAR(sa.beta[0], sb.beta[0], 0.05 * sb.beta[0]);
}

TEST(NodeLayer, ConsistentTeeDataStaysFlat) {
    // consistent data: a layer forms only where the branches meet
    auto net = tee({-1.0, 0.5, 0.5});
    JunctionMesh<2> m(net, 0, 1.0 / 16, 8.0);
    auto s = solve_node_layer(net, m, {1.0, 1.0, 1.0}, 0.0);
    EXPECT_FALSE(s.kirchhoff_warning);
    EXPECT_LE(std::abs(s.max() - 1.0), 1e-10);
}

TEST(NodeLayer, SeriesFollowsTargets) {
    auto net = straight_channel(1.0);
    JunctionMesh<2> m(net, 0, 1.0 / 8, 4.0);
    GraphGrid gg;
    gg.nt = 40;
    auto lvl = zero_level(net, gg, 0);
    for (auto& tr : lvl.vertices[0].traces)
        for (int n = 0; n <= gg.nt; ++n) tr.values[n] = std::pow(n * tr.dt, 2);
    auto S = build_node_series(net, m, lvl);
    EXPECT_TRUE(S.steady);
    EXPECT_LE(S.max_kirchhoff_defect, 1e-14);
    const auto dN = S.time_derivative(20);
    const double t = 20 * S.dt;
    for (int c = 0; c < m.size(); c += 17) {
        EXPECT_NEAR(S.value(c, 20), t * t, 1e-10);
        EXPECT_NEAR(dN[c], 2 * t, 1e-8);
    }
    EXPECT_NEAR(S.sample({0.3, 0.0}, 0.5 * (t + 21 * S.dt)), 0.5 * (t * t + std::pow(21 * S.dt, 2)), 1e-10);
}

TEST(Solvability, SourceBalanceExamples) {
    // node of area 4
    auto net = network_from_json(star_json({0.5, 0.5}, {-1, 1}, {"-x", "+x"}, 1.0, 2, 1.0, {1.0, 1.0, 1.0}));
    JunctionMesh<2> m(net, 0, 1.0 / 8, 4.0);
    EXPECT_NEAR(node_volume(m), 4.0, 1e-12);
    const double wall = node_wall_measure(m);
    EXPECT_NEAR(wall, 2 * 2.0 + 2 * 1.0, 1e-12);
    using P = JunctionMesh<2>::Point;
    EXPECT_EQ(junction_solvability_defect<2>(m, nullptr, nullptr, nullptr), 0.0);
    auto one = [](const P&) { return 1.0; };
    auto psi = [&](const P&) { return 4.0 / wall; };
    EXPECT_NEAR(junction_solvability_defect<2>(m, one, nullptr, psi), 0.0, 1e-12);
    EXPECT_NEAR(junction_solvability_defect<2>(m, one, nullptr, nullptr), 4.0, 1e-12);
    auto stub = [](int k, const P&) { return k == 0 ? 1.0 : 0.0; };
    EXPECT_NEAR(junction_solvability_defect<2>(m, nullptr, stub, nullptr), 1.0 * (4.0 - 1.0), 1e-12);
}

TEST(FluxDefect, ZeroDataGivesZero) {
    auto net = straight_channel();
    JunctionMesh<2> m(net, 0, 1.0 / 8, 4.0);
    GraphGrid gg;
    gg.nt = 20;
    auto lvl = zero_level(net, gg, 0);
    auto S = build_node_series(net, m, lvl);
    auto d = compute_flux_defect_d(net, m, S, S, lvl);
    for (double x : d.values) EXPECT_EQ(x, 0.0);
}

TEST(FluxDefect, EdgeSlopeTerm) {
    // w_prev = g y on each edge with zero vertex traces: d = sum h^2 g_i (1 - v_i I_chi)
    auto net = network_from_json(star_json({0.25, 0.25}, {-1, 1}, {"-x", "+x"}, 1.0, 3));
    JunctionMesh<3> m(net, 0, 1.0 / 8, 2.0);
    GraphGrid gg;
    gg.nt = 10;
    gg.cells_per_unit = 32;
    auto lvl = zero_level(net, gg, 0);
    const double g[2] = {0.7, -1.3};
    for (int e = 0; e < 2; ++e) {
        auto& W = lvl.edges[e];
        for (int n = 0; n <= W.grid.nt; ++n)
            for (int j = 0; j <= W.grid.nx; ++j) W.at(j, n) = g[e] * W.grid.x(j);
    }
    auto S = build_node_series(net, m, lvl);
    auto d = compute_flux_defect_d(net, m, S, S, lvl);
    const double I = 2.5 * 0.25, w = 0.25 * 0.25;
    const double expect = w * g[0] * (1 + I) + w * g[1] * (1 - I);
    for (double x : d.values) EXPECT_NEAR(x, expect, 1e-12);
}

TEST(FluxDefect, WallQuadratureConverges) {
    auto j = star_json({0.25, 0.25}, {-1, 1}, {"-x", "+x"}, 1.0, 2, 0.25, {0.25, 0.25, 0.25});
    // vanishes on the ports and at t = 0
    j["vertices"][0]["phi0"] = json{{"prod", {"t", "s", {{"sum", {0.0625, {{"prod", {-1.0, {{"pow", {"x1", 2}}}}}}}}}}}};
    auto net = network_from_json(j);
    GraphGrid gg;
    gg.nt = 40;
    gg.cells_per_unit = 64;
    auto w0 = solve_limit_alpha1(net, gg);
    auto zero = zero_level(net, gg, 0);
    std::vector<double> d;
    for (double dx : {1.0 / 16, 1.0 / 32}) {
        JunctionMesh<2> m(net, 0, dx, 4.0);
        auto S0 = build_node_series(net, m, w0);
        auto Sz = build_node_series(net, m, zero);
        d.push_back(compute_flux_defect_d(net, m, S0, Sz, zero).values.back());
    }
    EXPECT_NE(d[1], 0.0);
    EXPECT_NEAR(d[0], d[1], 0.02 * std::abs(d[1]));
}

TEST(NodeLayer, FieldCsv) {
    auto net = straight_channel();
    JunctionMesh<2> m(net, 0, 1.0 / 4, 1.0);
    std::ostringstream os;
    m.write_csv(os, std::vector<double>(m.size(), 1.0), net);
    EXPECT_EQ(os.str().substr(0, 17), "i,j,region,value\n");
}
