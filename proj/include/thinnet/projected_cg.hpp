#pragma once

// Jacobi-preconditioned conjugate gradients for singular symmetric systems whose
// nullspace is the constant vector.  The right side must sum to zero; residuals
// are projected back onto that subspace every step.

#include <cmath>
#include <vector>

#include "errors.hpp"

namespace thinnet {

inline void remove_sum(std::vector<double>& b) {
    double s = 0.0;
    for (double x : b) s += x;
    s /= static_cast<double>(b.size());
    for (double& x : b) x -= s;
}

// Solves A u = rhs; `apply(x, y)` writes y = A x.  Returns the iteration count.
template <class Apply>
int projected_cg(Apply&& apply, const std::vector<double>& diag, const std::vector<double>& rhs, std::vector<double>& u,
                 double tol, int max_iter) {
    const std::size_t n = rhs.size();
    std::vector<double> r = rhs, z(n), p(n), Ap(n);
    u.assign(n, 0.0);
    remove_sum(r);
    double bnorm = 0.0;
    for (double x : r) bnorm += x * x;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) return 0;
    auto precondition = [&] {
        for (std::size_t c = 0; c < n; ++c) z[c] = diag[c] > 0.0 ? r[c] / diag[c] : r[c];
        remove_sum(z);
    };
    precondition();
    p = z;
    double rz = 0.0;
    for (std::size_t c = 0; c < n; ++c) rz += r[c] * z[c];
    double rn = bnorm;
    for (int it = 1; it <= max_iter; ++it) {
        apply(p, Ap);
        double pAp = 0.0;
        for (std::size_t c = 0; c < n; ++c) pAp += p[c] * Ap[c];
        const double a = rz / pAp;
        for (std::size_t c = 0; c < n; ++c) {
            u[c] += a * p[c];
            r[c] -= a * Ap[c];
        }
        remove_sum(r);
        rn = 0.0;
        for (double x : r) rn += x * x;
        rn = std::sqrt(rn);
        if (rn <= tol * bnorm) return it;
        precondition();
        double rz_new = 0.0;
        for (std::size_t c = 0; c < n; ++c) rz_new += r[c] * z[c];
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t c = 0; c < n; ++c) p[c] = z[c] + beta * p[c];
    }
    throw NumericalError("projected conjugate gradient did not converge", rn / bnorm);
}

}  // namespace thinnet
