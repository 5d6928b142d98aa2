#pragma once

#include <cmath>

#include "errors.hpp"
#include "expression.hpp"

namespace thinnet {

// chi(s) = 0 for s <= 2 l0, 1 for s >= 3 l0, smoothstep in between.
struct NodeCutoff {
    double ell0 = 0.25;

    double operator()(double s, int order = 0) const {
        const double z = (s - 2.0 * ell0) / ell0;
        if (z <= 0.0) return 0.0;
        if (z >= 1.0) return order == 0 ? 1.0 : 0.0;
        return smoothstep(z, order) / std::pow(ell0, order);
    }

    // Integral of s chi'(s) over [2 l0, 3 l0], by Gauss-Legendre quadrature.
    double first_moment() const {
        static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
        static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double s = 2.5 * ell0 + 0.5 * ell0 * x[k];
            acc += w[k] * s * (*this)(s, 1);
        }
        return 0.5 * ell0 * acc;
    }
};

// Outlet blend: 1 for y >= l - delta, 0 for y <= l - 2 delta.
struct OutletCutoff {
    double length = 1.0;
    double delta = 0.1;

    double operator()(double y) const {
        const double z = (y - (length - 2.0 * delta)) / delta;
        if (z <= 0.0) return 0.0;
        if (z >= 1.0) return 1.0;
        return smoothstep(z);
    }
};

}  // namespace thinnet
