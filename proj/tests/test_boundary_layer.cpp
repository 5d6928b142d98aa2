#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "thinnet/boundary_layer.hpp"

using namespace thinnet;
using namespace thinnet::testing;

namespace {

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> g(n);
    for (int k = 0; k < n; ++k) g[k] = a + (b - a) * k / (n - 1);
    return g;
}

BoundaryLayer unit_speed_layer() {
    BoundaryLayer L;
    L.Phi0 = [](double t) { return t; };
    L.dPhi0 = [](double) { return 1.0; };
    L.v = [](double) { return 1.0; };
    L.dv = [](double) { return 0.0; };
    return L;
}

}  // namespace

TEST(BoundaryLayer, ZeroOrderExamples) {
    BoundaryLayer L;
    L.Phi0 = [](double) { return 1.0; };
    L.v = [](double) { return 2.0; };
    EXPECT_NEAR(L.pi0(1.0, 0.3), std::exp(-2.0), 1e-15);
    EXPECT_NEAR(L.pi0(1.0, 0.3), 0.135335, 1e-6);
    EXPECT_EQ(L.pi0(0.0, 0.7), 1.0);
    auto M = unit_speed_layer();
    EXPECT_EQ(M.pi0(2.0, 0.0), 0.0);
}

TEST(BoundaryLayer, FirstOrderMatchesIndependentSolution) {
    // Pi1'' + Pi1' = d/dt Pi0 = exp(-eta), Pi1(0) = 0, decaying: Pi1 = -eta exp(-eta)
    auto L = unit_speed_layer();
    for (double eta : {0.0, 0.3, 1.0, 4.0}) EXPECT_NEAR(L.pi1(eta, 0.5), -eta * std::exp(-eta), 1e-14);
    EXPECT_NEAR(L.pi1(1.0, 0.5), -0.367879, 1e-6);
    // the oracle itself, by finite differences independent of the library
    auto oracle = [](double e) { return -e * std::exp(-e); };
    const double h = 1e-3;
    for (double eta : {0.5, 1.0, 2.5}) {
        const double d1 = (oracle(eta + h) - oracle(eta - h)) / (2 * h);
        const double d2 = (oracle(eta + h) - 2 * oracle(eta) + oracle(eta - h)) / (h * h);
        EXPECT_NEAR(d2 + d1, std::exp(-eta), 1e-6);
    }
}

TEST(BoundaryLayer, DegenerateCoefficients) {
    BoundaryLayer L;
    L.Phi1 = [](double) { return 0.4; };
    L.v = [](double) { return 1.5; };
    L.dv = [](double) { return 0.0; };
    EXPECT_NEAR(L.pi1(0.8, 0.2), 0.4 * std::exp(-1.2), 1e-15);
    BoundaryLayer Z;
    Z.v = [](double) { return 1.0; };
    EXPECT_EQ(Z.pi0(0.5, 0.5), 0.0);
    EXPECT_EQ(Z.pi1(0.5, 0.5), 0.0);
    EXPECT_EQ(layer_residual(Z, 1, grid(0, 5, 11), grid(0, 1, 5)), 0.0);
}

TEST(BoundaryLayer, NonPositiveSpeedRejected) {
    BoundaryLayer L;
    L.Phi0 = [](double) { return 1.0; };
    L.v = [](double) { return 0.0; };
    EXPECT_THROW(L.pi0(1.0, 0.1), PositivityError);
    L.v = [](double) { return -1.0; };
    EXPECT_THROW(L.pi1(1.0, 0.1), PositivityError);
}

TEST(BoundaryLayer, ResidualsOnRandomData) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-2.0, 2.0), P(0.5, 3.0);
    const auto etas = grid(0.0, 8.0, 41), times = grid(0.0, 1.0, 11);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = U(rng), b = U(rng), c = U(rng), v0 = P(rng), v1 = 0.4 * U(rng);
        BoundaryLayer L;
        L.Phi0 = [=](double t) { return a * t * t + b * std::sin(t); };
        L.dPhi0 = [=](double t) { return 2 * a * t + b * std::cos(t); };
        L.Phi1 = [=](double t) { return c * t; };
        L.v = [=](double t) { return v0 + v1 * t * t; };
        L.dv = [=](double t) { return 2 * v1 * t; };
        EXPECT_LE(layer_residual(L, 0, etas, times), 1e-6);
        EXPECT_LE(layer_residual(L, 1, etas, times), 1e-6);
        EXPECT_LE(layer_residual(L, 0, etas, times, 1e-3), 1e-4 * std::max(1.0, std::abs(a) + std::abs(b)));
        EXPECT_LE(layer_residual(L, 1, etas, times, 1e-3), 1e-4 * std::max(1.0, std::abs(a) + std::abs(b) + std::abs(c)));
        // decay: log|Pi0| affine with slope -v
        const double t = 0.7;
        const double s = fit_layer_decay(L, t, grid(0.0, 6.0, 25));
        EXPECT_NEAR(s / -L.v(t), 1.0, 1e-6);
        // without registered derivatives the centred differences are close enough
        L.dPhi0 = nullptr;
        L.dv = nullptr;
        EXPECT_LE(layer_residual(L, 1, etas, times), 1e-6);
    }
}

TEST(BoundaryLayer, ChannelOutletLayer) {
    auto net = network_from_json(channel_json(2.0));
    GraphGrid gg;
    gg.nt = 100;
    gg.cells_per_unit = 50;
    auto w0 = solve_limit_alpha1(net, gg);
    auto layers = make_outlet_layers(net, w0);
    ASSERT_EQ(layers.size(), 1u);
    EXPECT_EQ(layers[0].edge, 1);
    for (double t : {0.0, 0.5, 1.3, 2.0}) {
        const double w = w0.sample(1, 1.0, t);
        EXPECT_NEAR(layers[0].pi0(0.0, t), net.q(1, t) - w, 1e-10);
    }
    EXPECT_EQ(layers[0].pi0(1.0, 0.0), 0.0);
    EXPECT_EQ(layers[0].pi1(1.0, 0.0), 0.0);
    auto lvl = make_level_layers(net, w0);
    EXPECT_NEAR(lvl[0].pi0(0.0, 1.5), -w0.sample(1, 1.0, 1.5), 1e-10);
}
