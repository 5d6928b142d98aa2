#pragma once

// eps-convergence study: for each eps build the approximation, solve the direct
// problem, record the errors, and fit log(error) against log(eps).

#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "assembler.hpp"
#include "full_reference.hpp"
#include "numerics.hpp"

namespace thinnet {

struct StudyOptions {
    std::vector<double> epsilons{0.2, 0.1, 0.05};
    double rho = 16.0;
    double gamma = 0.9;
    double alpha = 1.0;
    int nt = 400;             // direct solver steps
    int sample_every = 20;
    PipelineOptions pipeline;  // eps, gamma, alpha and correctors are set per run
    bool gradient = true;      // also compute the gradient error with the first-order approximation
    double min_order = 0.6;
    int threads = 0;           // <= 0: THINNET_THREADS or the hardware count
};

struct StudyRow {
    double eps = 0.0;
    double error_max = NAN;
    double error_grad = NAN;
    double error_max_without_level = NAN;  // alpha in (1, 2): the eps^(alpha-1) level left out
    double seconds = 0.0;
    std::string failure;  // empty on success
    bool ok() const { return failure.empty(); }
};

struct ConvergenceReport {
    double alpha = 1.0;
    std::vector<StudyRow> rows;
    double fitted_order = NAN;
    double gradient_order = NAN;
    bool decreasing = false;
    bool gradient_decreasing = false;
    bool pass = false;
};

inline int study_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("THINNET_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Copy of an approximation without its eps^(alpha-1) level.
template <int Dim>
Approximation<Dim> without_level(Approximation<Dim> A) {
    A.w_am1 = nullptr;
    A.layers_am1.clear();
    for (auto& B : A.nodes) B.N_am1 = nullptr;
    return A;
}

namespace detail {

inline double fit_order(const std::vector<StudyRow>& rows, double StudyRow::*field) {
    std::vector<double> x, y;
    for (auto& r : rows)
        if (r.ok() && r.*field > 0.0) {
            x.push_back(std::log(r.eps));
            y.push_back(std::log(r.*field));
        }
    if (x.size() < 2) return NAN;
    return least_squares_line(x, y).slope;
}

inline bool strictly_decreasing(const std::vector<StudyRow>& rows, double StudyRow::*field) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!rows[k].ok() || !(rows[k].*field > 0.0)) return false;
        if (k > 0 && !(rows[k].*field < rows[k - 1].*field)) return false;
    }
    return true;
}

inline StudyRow run_one(const Network& net, const StudyOptions& o, double eps) {
    StudyRow row;
    row.eps = eps;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        PipelineOptions p = o.pipeline;
        p.assembly.eps = eps;
        p.assembly.gamma = o.gamma;
        p.assembly.alpha = o.alpha;
        p.assembly.with_correctors = false;
        const auto A = build_approximation<2>(net, p);

        Network physical = net;
        physical.alpha = o.alpha;
        FullOptions f;
        f.eps = eps;
        f.rho = o.rho;
        f.nt = o.nt;
        f.alpha = o.alpha;
        f.sample_every = o.sample_every;
        const auto full = solve_full(physical, f);

        row.error_max = error_max(full, A);
        if (A.w_am1) row.error_max_without_level = error_max(full, without_level(A));
        if (o.gradient) {
            if (o.alpha == 1.0) {
                p.assembly.with_correctors = true;
                row.error_grad = error_grad_l2(full, build_approximation<2>(net, p));
            } else {
                row.error_grad = error_grad_l2(full, A);
            }
        }
    } catch (const std::exception& e) {
        row.failure = e.what();
        if (row.failure.empty()) row.failure = "stage failed";
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

}  // namespace detail

// Per-eps runs are independent and run in parallel; failures are recorded per row.
inline ConvergenceReport convergence_study(const Network& net, const StudyOptions& o) {
    if (o.epsilons.size() < 3) throw ConfigError("a convergence study needs at least three eps values");
    for (std::size_t k = 0; k < o.epsilons.size(); ++k) {
        if (!(o.epsilons[k] > 0.0)) throw ConfigError("eps values must be positive");
        if (k > 0 && !(o.epsilons[k] < o.epsilons[k - 1])) throw ConfigError("eps values must be strictly decreasing");
    }
    ConvergenceReport rep;
    rep.alpha = o.alpha;
    rep.rows.resize(o.epsilons.size());
    const int nthreads = std::min<int>(study_threads(o.threads), static_cast<int>(o.epsilons.size()));
    std::size_t next = 0;
    std::mutex m;
    auto worker = [&] {
        for (;;) {
            std::size_t k;
            {
                std::lock_guard<std::mutex> lock(m);
                if (next >= o.epsilons.size()) return;
                k = next++;
            }
            rep.rows[k] = detail::run_one(net, o, o.epsilons[k]);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    rep.fitted_order = detail::fit_order(rep.rows, &StudyRow::error_max);
    rep.decreasing = detail::strictly_decreasing(rep.rows, &StudyRow::error_max);
    if (o.gradient) {
        rep.gradient_order = detail::fit_order(rep.rows, &StudyRow::error_grad);
        rep.gradient_decreasing = detail::strictly_decreasing(rep.rows, &StudyRow::error_grad);
    }
    bool all_ok = true;
    for (auto& r : rep.rows) all_ok = all_ok && r.ok();
    rep.pass = all_ok && rep.decreasing && rep.fitted_order >= o.min_order;
    return rep;
}

// ---------------------------------------------------------------------------
// Output

// JSON with every number printed to 17 significant digits.
inline void write_report_json(std::ostream& os, const ConvergenceReport& r) {
    auto num = [](double x) { return std::isfinite(x) ? fmt17(x) : std::string("null"); };
    auto list = [&](double StudyRow::*f) {
        std::string s = "[";
        for (std::size_t k = 0; k < r.rows.size(); ++k) s += (k ? ", " : "") + num(r.rows[k].*f);
        return s + "]";
    };
    os << "{\n";
    os << "  \"alpha\": " << num(r.alpha) << ",\n";
    os << "  \"epsilons\": " << list(&StudyRow::eps) << ",\n";
    os << "  \"errors_max\": " << list(&StudyRow::error_max) << ",\n";
    os << "  \"errors_grad\": " << list(&StudyRow::error_grad) << ",\n";
    bool has_level = false;
    for (auto& row : r.rows) has_level = has_level || std::isfinite(row.error_max_without_level);
    if (has_level)
        os << "  \"errors_max_without_level\": " << list(&StudyRow::error_max_without_level) << ",\n";
    os << "  \"failures\": [";
    for (std::size_t k = 0; k < r.rows.size(); ++k) os << (k ? ", " : "") << nlohmann::json(r.rows[k].failure).dump();
    os << "],\n";
    os << "  \"fitted_order\": " << num(r.fitted_order) << ",\n";
    os << "  \"gradient_order\": " << num(r.gradient_order) << ",\n";
    os << "  \"decreasing\": " << (r.decreasing ? "true" : "false") << ",\n";
    os << "  \"pass\": " << (r.pass ? "true" : "false") << "\n}\n";
}

inline void write_report_csv(std::ostream& os, const ConvergenceReport& r) {
    os << "eps,error_max,error_grad,error_max_without_level,status\n";
    for (auto& row : r.rows)
        os << fmt17(row.eps) << ',' << fmt17(row.error_max) << ',' << fmt17(row.error_grad) << ','
           << fmt17(row.error_max_without_level) << ',' << (row.ok() ? "ok" : "failed") << '\n';
}

// Whitespace-separated columns for gnuplot: eps, error_max, error_grad.
inline void write_report_gnuplot(std::ostream& os, const ConvergenceReport& r) {
    os << "# eps error_max error_grad\n";
    for (auto& row : r.rows) os << fmt17(row.eps) << ' ' << fmt17(row.error_max) << ' ' << fmt17(row.error_grad) << '\n';
    os << "# fitted order " << fmt17(r.fitted_order) << '\n';
}

}  // namespace thinnet
