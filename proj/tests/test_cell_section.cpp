#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "thinnet/cell_section.hpp"

using namespace thinnet;
using namespace thinnet::testing;

namespace {

// Single-edge pair with unit radius and a constant axial speed; edge 1 carries phi.
Network cell_net(int dim, const json& phi, const json& vbar = nullptr, double h = 1.0) {
    auto j = star_json({h, h}, {-1, 1}, {"-x", "+x"}, 1.0, dim, 0.25, {0.25, 2 * h, 2 * h});
    if (!phi.is_null()) j["nonlinearity"] = json::array({{{"edge", 1}, {"phi", phi}, {"support", {0.0, 1.0}}}});
    if (!vbar.is_null()) j["velocity"][1]["vbar"] = vbar;
    return network_from_json(j);
}

double radial_error(int n) {
    // phi = c: u1 = -(c/2)(r^2 - 1/2)
    const double c = 1.3;
    auto net = cell_net(3, c);
    CellOptions opt;
    opt.nr = n;
    opt.ntheta = n;
    CellInputs in{1, 0.5, 0.2, 1.0, 0.0, -2.0 * c};
    auto s = solve_cell_u1(net, in, opt);
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = s.grid.r(i);
        for (int k = 0; k < n; k += 7) err = std::max(err, std::abs(s.at(i, k) + 0.5 * c * (r * r - 0.5)));
    }
    return err;
}

}  // namespace

TEST(Cell, RadialClosedForm) {
    EXPECT_LT(radial_error(64), 1e-3);
}

TEST(Cell, RadialCaseConvergesAtSecondOrder) {
    const double e1 = radial_error(16), e2 = radial_error(32);
    EXPECT_GT(e1 / e2, 3.5);
    EXPECT_LT(e1 / e2, 4.5);
}

TEST(Cell, ZeroDataGivesZero) {
    auto net = cell_net(3, nullptr);
    auto s = solve_cell_u1(net, CellInputs{1, 0.5, 0.3, 0.0, 0.0, 0.0});
    EXPECT_EQ(s.max_abs(), 0.0);
}

TEST(Cell, HarmonicPotentialIdentity) {
    // vbar = grad(xi_2): u1 = w0 (xi_2 - mean)
    auto net = cell_net(3, nullptr, json::array({1.0, 0.0}));
    const double w0 = 2.0;
    auto s = solve_cell_u1(net, CellInputs{1, 0.5, 0.3, w0, 0.0, 0.0});
    double err = 0.0;
    for (int c = 0; c < s.grid.size(); ++c) {
        double a, b;
        s.grid.center(c, a, b);
        err = std::max(err, std::abs(s.u[c] - w0 * a));
    }
    EXPECT_LT(err, 1e-3);
    // 2D: the interval march reproduces a linear profile exactly
    auto net2 = cell_net(2, nullptr, json::array({1.0}));
    auto s2 = solve_cell_u1(net2, CellInputs{1, 0.5, 0.3, w0, 0.0, 0.0});
    for (int c = 0; c < s2.grid.size(); ++c) {
        double a, b;
        s2.grid.center(c, a, b);
        EXPECT_NEAR(s2.u[c], w0 * a, 1e-12);
    }
    EXPECT_NEAR(s2.boundary[0], w0, 1e-12);
}

TEST(Cell, IntervalRadialAnalogue) {
    // 2D: phi = c gives u1 = -(c/(2h)) (x^2 - h^2/3), exact for the quadratic
    const double c = 0.7, h = 0.5;
    auto net = cell_net(2, c, nullptr, h);
    auto s = solve_cell_u1(net, CellInputs{1, 0.5, 0.0, 1.0, 0.0, -c / h});
    // the zero-mean gauge is the midpoint-rule mean, which sees x^2 as h^2/3 - dx^2/12
    const double dx = s.grid.dr(), shift = -c / (2 * h) * dx * dx / 12;
    for (int i = 0; i < s.grid.nr; ++i) {
        double a, b;
        s.grid.center(i, a, b);
        EXPECT_NEAR(s.u[i], -c / (2 * h) * (a * a - h * h / 3) + shift, 1e-12);
    }
    EXPECT_NEAR(s.boundary[0], -c / (2 * h) * (h * h - h * h / 3) + shift, 1e-12);
}

TEST(Cell, MeanIsZero) {
    auto net = cell_net(3, json{{"prod", {"s", {{"sum", {1.0, "x2"}}}}}}, json::array({"x3", 0.5}));
    auto in = CellInputs{1, 0.5, 0.3, 1.5, 0.0, 0.0};
    in.w0_t = -averaged_phi(net, 1, in.w0, in.y, in.t);
    auto s = solve_cell_u1(net, in);
    EXPECT_LE(std::abs(s.mean), 1e-10 * s.max_abs());
    EXPECT_GT(s.max_abs(), 0.0);
}

TEST(Cell, ConjugateGradientAgreesWithFactorization) {
    auto net = cell_net(3, json{{"prod", {"s", {{"sum", {1.0, {{"pow", {"x2", 3}}}}}}}}}, json::array({"x3", "x2"}));
    CellInputs in{1, 0.5, 0.3, 1.5, 0.0, 0.0};
    CellOptions opt;
    opt.nr = 24;
    opt.ntheta = 32;
    opt.use_limit_identity = true;
    auto a = solve_cell_u1(net, in, opt);
    opt.method = CellMethod::direct;
    auto b = solve_cell_u1(net, in, opt);
    ASSERT_EQ(a.u.size(), b.u.size());
    double d = 0.0;
    for (std::size_t k = 0; k < a.u.size(); ++k) d = std::max(d, std::abs(a.u[k] - b.u[k]));
    EXPECT_LT(d, 1e-8 * a.max_abs());
    EXPECT_GT(a.iterations, 0);
}

TEST(Cell, GaugeIndependence) {
    auto net = cell_net(3, 1.0);
    CellInputs in{1, 0.5, 0.3, 1.0, 0.0, -2.0};
    auto s = solve_cell_u1(net, in);
    auto shifted = s.u;
    for (double& x : shifted) x += 3.7;
    project_mean(s.grid, shifted);
    for (std::size_t k = 0; k < s.u.size(); ++k) EXPECT_NEAR(shifted[k], s.u[k], 1e-12);
}

TEST(Cell, LinearInJointScaling) {
    auto phi = json{{"prod", {0.8, "s", {{"sum", {1.0, "x3"}}}}}};
    auto net = cell_net(3, phi, json::array({"x3", 0.0}));
    CellOptions opt;
    opt.use_limit_identity = true;
    opt.method = CellMethod::direct;
    auto a = solve_cell_u1(net, CellInputs{1, 0.5, 0.3, 1.0, 0.0, 0.0}, opt);
    auto b = solve_cell_u1(net, CellInputs{1, 0.5, 0.3, 2.0, 0.0, 0.0}, opt);
    for (std::size_t k = 0; k < a.u.size(); ++k) EXPECT_NEAR(b.u[k], 2.0 * a.u[k], 1e-9);
}

TEST(Solvability, ResidualExamples) {
    auto net = cell_net(3, 1.0);
    CellInputs in{1, 0.5, 0.3, 1.0, 0.0, -2.0};
    EXPECT_LE(std::abs(cell_solvability_residual(net, in)), 1e-8);
    in.w0_t += 1.0;
    EXPECT_NEAR(cell_solvability_residual(net, in), M_PI, 1e-12);
    EXPECT_THROW(solve_cell_u1(net, in), CompatibilityError);

    auto free = cell_net(3, nullptr);
    CellInputs f{1, 0.5, 0.3, 1.0, 0.4, -0.4};
    EXPECT_NEAR(cell_solvability_residual(free, f), 0.0, 1e-13);

    auto n2 = cell_net(2, nullptr, nullptr, 0.5);
    CellInputs g{1, 0.5, 0.3, 1.0, 0.0, 1.0};
    EXPECT_NEAR(cell_solvability_residual(n2, g), 1.0, 1e-13);  // interval length 2h
}

TEST(CorrectorSource, RadialExampleIsOneHalf) {
    // phi = s, h = 1, w0 = 1: u1 on the circle is -1/4, so f = -(1/pi)(2 pi)(-1/4)
    auto net = cell_net(3, "s");
    CellInputs in{1, 0.5, 0.3, 1.0, 0.0, -2.0};
    auto s = solve_cell_u1(net, in);
    for (double b : s.boundary) EXPECT_NEAR(b, -0.25, 1e-4);
    EXPECT_NEAR(corrector_source_f(net, in, 0.0, s), 0.5, 1e-4);
    EXPECT_NEAR(corrector_source_f(net, in, 3.0, s), 3.5, 1e-4);
}

TEST(CorrectorSource, VanishingBoundaryTerm) {
    auto net = cell_net(3, nullptr);
    CellInputs in{1, 0.5, 0.3, 1.0, 0.0, 0.0};
    auto s = solve_cell_u1(net, in);
    EXPECT_EQ(corrector_source_f(net, in, 1.25, s), 1.25);
}

TEST(CorrectorSource, CachedProviderMatchesDirectSolve) {
    auto net = cell_net(3, "s");
    CellOptions opt;
    opt.nr = 32;
    opt.ntheta = 32;
    CellCorrector cc(net, opt);
    EXPECT_NEAR(cc.boundary_term(1, 0.5, 0.3, 1.0, 0.0, 0.0), -0.5, 1e-3);
    EXPECT_NEAR(cc.boundary_term(1, 0.4, 0.1, 2.0, 0.0, 0.0), -1.0, 2e-3);
    auto n2 = cell_net(2, "s", nullptr, 0.5);
    CellCorrector c2(n2);
    // 2D, h = 1/2: u1(+-h) = -(w0/(2h))(h^2 - h^2/3), boundary average (u(+h) + u(-h))/(2h)
    const double h = 0.5, dx = 2 * h / 64, u = -(1.0 / (2 * h)) * (h * h - h * h / 3 + dx * dx / 12);
    EXPECT_NEAR(c2.boundary_term(1, 0.5, 0.3, 1.0, 0.0, 0.0), u / h, 1e-12);
}

TEST(Cell, CsvDump) {
    auto net = cell_net(2, 1.0);
    CellOptions opt;
    opt.nr = 8;
    auto s = solve_cell_u1(net, CellInputs{1, 0.5, 0.3, 1.0, 0.0, -1.0}, opt);
    std::ostringstream os;
    s.write_csv(os);
    EXPECT_EQ(os.str().substr(0, 9), "x2,x3,u1\n");
}
