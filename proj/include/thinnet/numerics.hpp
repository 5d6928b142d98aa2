#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "errors.hpp"

namespace thinnet {

// Samples on a uniform grid t_n = n*dt, n = 0..N, read back by linear interpolation.
struct TimeSeries {
    double dt = 1.0;
    std::vector<double> values;

    TimeSeries() = default;
    TimeSeries(double step, std::vector<double> v) : dt(step), values(std::move(v)) {}

    double t_end() const { return dt * static_cast<double>(values.size() - 1); }

    double operator()(double t) const {
        if (values.empty()) return 0.0;
        if (t <= 0.0) return values.front();
        const double u = t / dt;
        const auto n = static_cast<std::size_t>(u);
        if (n + 1 >= values.size()) return values.back();
        const double f = u - static_cast<double>(n);
        return (1.0 - f) * values[n] + f * values[n + 1];
    }

    // Centered difference in the interior, second-order one-sided at the ends.
    double derivative_at(std::size_t n) const {
        const std::size_t N = values.size() - 1;
        if (N < 2) return N == 1 ? (values[1] - values[0]) / dt : 0.0;
        if (n == 0) return (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
        if (n == N) return (3.0 * values[N] - 4.0 * values[N - 1] + values[N - 2]) / (2.0 * dt);
        return (values[n + 1] - values[n - 1]) / (2.0 * dt);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

// Finite-difference weights for the m-th derivative at x0 over arbitrary nodes (Fornberg).
inline std::vector<double> fd_weights(double x0, const std::vector<double>& x, int m) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0, c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

// Second derivative of uniformly spaced samples with 5-point stencils,
// centered in the interior and shifted at the ends.
inline std::vector<double> second_derivative_5pt(const std::vector<double>& f, double h) {
    const int n = static_cast<int>(f.size());
    if (n < 5) throw ConfigError("five-point stencil needs at least 5 samples");
    std::vector<double> out(n);
    std::vector<std::vector<double>> w(5);
    for (int s = 0; s < 5; ++s) w[s] = fd_weights(static_cast<double>(s), {0, 1, 2, 3, 4}, 2);
    for (int i = 0; i < n; ++i) {
        const int start = std::clamp(i - 2, 0, n - 5);
        const auto& wi = w[i - start];
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) acc += wi[k] * f[start + k];
        out[i] = acc / (h * h);
    }
    return out;
}

// Cubic Lagrange interpolation of uniformly spaced nodes f[0..n] (spacing h) at x,
// stencil clamped to the array.
inline double cubic_interp(const double* f, int n, double h, double x) {
    const double u = x / h;
    if (u <= 0.0) return f[0];
    if (u >= n) return f[n];
    int j = static_cast<int>(u);
    if (n < 3) {
        const double s = u - j;
        return (1.0 - s) * f[j] + s * f[std::min(j + 1, n)];
    }
    const int b = std::clamp(j - 1, 0, n - 3);
    const double s = u - b;
    const double f0 = f[b], f1 = f[b + 1], f2 = f[b + 2], f3 = f[b + 3];
    return f0 * (s - 1) * (s - 2) * (s - 3) / -6.0 + f1 * s * (s - 2) * (s - 3) / 2.0 +
           f2 * s * (s - 1) * (s - 3) / -2.0 + f3 * s * (s - 1) * (s - 2) / 6.0;
}

// Cubic read of a time series, held constant outside its range.
inline double cubic_sample(const TimeSeries& ts, double t) {
    if (ts.values.empty()) return 0.0;
    return cubic_interp(ts.values.data(), static_cast<int>(ts.values.size()) - 1, ts.dt, t);
}

inline double linear_interp(const double* f, int n, double h, double x) {
    const double u = x / h;
    if (u <= 0.0) return f[0];
    if (u >= n) return f[n];
    const int j = static_cast<int>(u);
    const double s = u - j;
    return j >= n ? f[n] : (1.0 - s) * f[j] + s * f[j + 1];
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return {std::nan(""), std::nan("")};
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) sx += x[i], sy += y[i];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

// Round-trip exact text form of a double.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace thinnet
