#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thinnet/characteristics.hpp"

using namespace thinnet;

namespace {

auto one = [](double, double) { return 1.0; };
auto zero_dv = [](double, double) { return 0.0; };
auto no_source = [](double, double, double) { return 0.0; };
auto tsq = [](double t) { return t * t; };

EdgeGrid grid(int nx, int nt, double L = 1.0, double T = 1.0) {
    EdgeGrid g;
    g.L = L;
    g.T = T;
    g.nx = nx;
    g.nt = nt;
    return g;
}

}  // namespace

TEST(Trace, StraightLineHitsInflowBoundary) {
    auto c = trace_characteristic(one, 0.5, 1.0, grid(10, 10));
    EXPECT_EQ(c.side, EntrySide::inflow_boundary);
    EXPECT_NEAR(c.x0, 0.0, 1e-12);
    EXPECT_NEAR(c.t0, 0.5, 1e-12);
}

TEST(Trace, StraightLineHitsInitialLine) {
    auto c = trace_characteristic(one, 0.8, 0.3, grid(10, 10));
    EXPECT_EQ(c.side, EntrySide::initial_line);
    EXPECT_NEAR(c.x0, 0.5, 1e-12);
    EXPECT_NEAR(c.t0, 0.0, 1e-12);
}

TEST(Trace, ExponentialCharacteristicThroughCorner) {
    // v = 1 + x: x(tau) = e^tau - 1 ends at the corner (0,0).
    auto v = [](double x, double) { return 1.0 + x; };
    auto c = trace_characteristic(v, std::exp(1.0) - 1.0, 1.0, grid(8, 256, 2.0, 1.0));
    EXPECT_NEAR(c.x0, 0.0, 1e-8);
    EXPECT_NEAR(c.t0, 0.0, 1e-8);
    for (std::size_t k = 0; k < c.x.size(); ++k) EXPECT_NEAR(c.x[k], std::exp(c.tau[k]) - 1.0, 1e-8);
    // monotone in tau
    for (std::size_t k = 1; k < c.x.size(); ++k) EXPECT_LT(c.x[k], c.x[k - 1]);
}

TEST(Trace, NegativeVelocityEntersFromRight) {
    auto v = [](double, double) { return -2.0; };
    auto c = trace_characteristic(v, 0.5, 1.0, grid(10, 10));
    EXPECT_EQ(c.side, EntrySide::inflow_boundary);
    EXPECT_NEAR(c.x0, 1.0, 1e-12);
    EXPECT_NEAR(c.t0, 0.75, 1e-12);
}

TEST(Trace, SignChangeThrows) {
    auto v = [](double, double t) { return 0.5 - t; };
    EXPECT_THROW(trace_characteristic(v, 0.5, 1.0, grid(10, 20)), SignChangeError);
}

TEST(Moc, PureTransport) {
    auto s = solve_edge_moc(one, zero_dv, no_source, tsq, grid(64, 64));
    EXPECT_NEAR(s.at(32, 64), 0.25, 1e-12);
    double err = 0.0;
    for (int n = 0; n <= 64; ++n)
        for (int j = 0; j <= 64; ++j) {
            const double t = n / 64.0, x = j / 64.0;
            err = std::max(err, std::abs(s.at(j, n) - (t > x ? tsq(t - x) : 0.0)));
        }
    EXPECT_LT(err, 1e-12);
}

TEST(Moc, ClosedFormDamping) {
    // w = q(t - x) e^{-x} for t > x
    auto psi = [](double w, double, double) { return -w; };
    auto s = solve_edge_moc(one, zero_dv, psi, tsq, grid(128, 128));
    EXPECT_NEAR(s.at(64, 128), 0.25 * std::exp(-0.5), 1e-6);
    EXPECT_NEAR(s.sample(0.5, 1.0), 0.15163, 1e-5);
    // cross-check against the finite-volume oracle on a fine grid
    auto src = [](double w, double, double) { return -w; };
    auto fv = solve_edge_fv(one, src, tsq, grid(4096, 4608));
    EXPECT_NEAR(fv.sample(0.5, 1.0), 0.25 * std::exp(-0.5), 2e-3);
}

TEST(Moc, ZeroDataGivesZeroExactly) {
    auto psi = [](double w, double x, double t) { return -w * (1 + x) + std::sin(w) * t; };
    auto s = solve_edge_moc([](double x, double t) { return 1.0 + 0.3 * x * t; }, psi, [](double) { return 0.0; }, grid(32, 32));
    EXPECT_EQ(s.max_abs(), 0.0);
    auto f = solve_edge_fv(one, psi, [](double) { return 0.0; }, grid(32, 40));
    EXPECT_EQ(f.max_abs(), 0.0);
}

TEST(Moc, Causality) {
    auto q1 = [](double t) { return t * t; };
    auto q2 = [](double t) { return t <= 0.5 ? t * t : t * t + 3.0 * (t - 0.5) * (t - 0.5); };
    auto psi = [](double w, double, double) { return -0.5 * w; };
    auto v = [](double x, double) { return 0.8 + 0.2 * x; };
    auto a = solve_edge_moc(v, psi, q1, grid(40, 40));
    auto b = solve_edge_moc(v, psi, q2, grid(40, 40));
    for (int n = 0; n <= 20; ++n)
        for (int j = 0; j <= 40; ++j) EXPECT_NEAR(a.at(j, n), b.at(j, n), 1e-10);
}

TEST(Moc, NegativeVelocityUsesRightBoundary) {
    auto v = [](double, double) { return -1.0; };
    auto s = solve_edge_moc(v, zero_dv, no_source, tsq, grid(64, 64));
    // w(x,t) = q(t - (1 - x))
    EXPECT_NEAR(s.at(32, 64), 0.25, 1e-12);
    EXPECT_NEAR(s.at(64, 40), tsq(40 / 64.0), 1e-14);
}

TEST(Moc, GlobalPicardContracts) {
    // Psi = -w: Lipschitz constant 1, T = 1.
    auto psi = [](double w, double, double) { return -w; };
    MocOptions opt;
    opt.schedule = PicardSchedule::global;
    auto s = solve_edge_moc(one, zero_dv, psi, tsq, grid(32, 32), opt);
    ASSERT_GE(s.residuals.size(), 3u);
    for (std::size_t k = 1; k < s.residuals.size(); ++k) {
        if (s.residuals[k - 1] < 1e-13) break;
        EXPECT_LE(s.residuals[k], 1.0 * s.residuals[k - 1]) << k;
    }
    EXPECT_LE(s.residuals.back(), 1e-10);
    // same fixed point as the marching schedule
    auto m = solve_edge_moc(one, zero_dv, psi, tsq, grid(32, 32));
    EXPECT_LT(max_abs_diff(s, m), 1e-9);
}

TEST(Moc, NonConvergenceCarriesResidual) {
    auto psi = [](double w, double, double) { return -w; };
    MocOptions opt;
    opt.schedule = PicardSchedule::global;
    opt.max_iter = 2;
    try {
        solve_edge_moc(one, zero_dv, psi, tsq, grid(16, 16), opt);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_GT(e.residual, 0.0);
    }
}

TEST(Fv, PureTransportFirstOrder) {
    auto a = solve_edge_fv(one, no_source, tsq, grid(128, 160));
    auto b = solve_edge_fv(one, no_source, tsq, grid(256, 320));
    const double ea = std::abs(a.sample(0.5, 1.0) - 0.25), eb = std::abs(b.sample(0.5, 1.0) - 0.25);
    EXPECT_LT(ea, 2e-2);
    EXPECT_LT(eb, 0.7 * ea);
}

TEST(Fv, CflViolationIsConfigError) {
    EXPECT_THROW(solve_edge_fv(one, no_source, tsq, grid(64, 32)), ConfigError);
}

TEST(Fv, AgreesWithMocAtModerateGrid) {
    auto psi = [](double w, double, double) { return -w; };
    auto m = solve_edge_moc(one, zero_dv, psi, tsq, grid(512, 544));
    auto f = solve_edge_fv(one, psi, tsq, grid(512, 544));
    EXPECT_LT(max_abs_diff(m, f), 5e-3);
}

TEST(Moc, OracleEquivalenceIsFirstOrder) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const double a = 0.3 + 0.25 * U(rng), b = 0.15 * U(rng), c = 0.15 * U(rng);
        const double k = U(rng), A = 0.5 + U(rng);
        const int sgn = trial % 2 ? -1 : 1;
        auto v = [=](double x, double t) { return sgn * (a + b * x + c * t * x); };
        auto dv = [=](double, double t) { return sgn * (b + c * t); };
        auto psi = [=](double w, double x, double t) { return -k * w + 0.3 * std::sin(w) * x * t; };
        auto q = [=](double t) { return A * t * t; };
        auto m1 = solve_edge_moc(v, dv, psi, q, grid(128, 128));
        auto f1 = solve_edge_fv(v, psi, q, grid(128, 128));
        auto m2 = solve_edge_moc(v, dv, psi, q, grid(256, 256));
        auto f2 = solve_edge_fv(v, psi, q, grid(256, 256));
        const double d1 = max_abs_diff(m1, f1), d2 = max_abs_diff(m2, f2);
        EXPECT_GT(d2 / d1, 0.35) << trial;
        EXPECT_LT(d2 / d1, 0.65) << trial;
    }
}
