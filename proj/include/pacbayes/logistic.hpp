#pragma once
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

// Regularized logistic regression: losses, objective/gradient, and a
// limited-memory quasi-Newton trainer with strong-Wolfe line search.
namespace pacbayes {

/// Non-owning view over a contiguous row-major design matrix and 0/1 labels.
struct DataView {
    const double* x = nullptr;
    const std::uint8_t* y = nullptr;
    std::size_t rows = 0;
    std::size_t dim = 0;

    std::span<const double> row(std::size_t i) const { return {x + i * dim, dim}; }
    DataView prefix(std::size_t n) const { return {x, y, n < rows ? n : rows, dim}; }
    bool empty() const { return rows == 0; }
};

struct TrainConfig {
    double lambda = 0.01;   // L2 coefficient, > 0
    int max_iters = 500;
    double grad_tol = 1e-7; // on the gradient L2 norm
    int memory = 10;        // quasi-Newton history length
};

struct TrainResult {
    std::vector<double> weights;
    double objective = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Numerically stable logistic function 1/(1+e^-t).
inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// 0-1 loss of the thresholded predictor: 1 iff 1{w.x > 0} != y.
/// The threshold is strict, so w.x == 0 predicts class 0.
inline int zero_one_loss(std::span<const double> w, std::span<const double> x, int y) {
    if (w.size() != x.size()) throw std::invalid_argument("zero_one_loss: dimension mismatch");
    const int pred = dot(w, x) > 0.0 ? 1 : 0;
    return pred != y ? 1 : 0;
}

// log(1 + e^t) without overflow
inline double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// Objective lambda ||w||^2 / 2 + mean cross-entropy, and its exact gradient
/// lambda w + mean (sigmoid(w.x) - y) x.
inline double logistic_objective(std::span<const double> w, DataView data, double lambda,
                                 std::span<double> grad) {
    if (data.empty()) throw std::invalid_argument("logistic_objective: empty slice");
    if (w.size() != data.dim || grad.size() != data.dim)
        throw std::invalid_argument("logistic_objective: dimension mismatch");
    const double inv_n = 1.0 / static_cast<double>(data.rows);
    for (std::size_t j = 0; j < data.dim; ++j) grad[j] = lambda * w[j];
    double loss = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        const auto xi = data.row(i);
        const double z = dot(w, xi);
        const double yi = static_cast<double>(data.y[i]);
        // -y log(sigmoid) - (1-y) log(1-sigmoid) == y softplus(-z) + (1-y) softplus(z)
        loss += yi * softplus(-z) + (1.0 - yi) * softplus(z);
        const double c = (sigmoid(z) - yi) * inv_n;
        for (std::size_t j = 0; j < data.dim; ++j) grad[j] += c * xi[j];
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < data.dim; ++j) sq += w[j] * w[j];
    return 0.5 * lambda * sq + loss * inv_n;
}

inline double logistic_objective_value(std::span<const double> w, DataView data, double lambda) {
    std::vector<double> g(data.dim);
    return logistic_objective(w, data, lambda, g);
}

namespace detail {

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Strong-Wolfe line search (bracket + zoom with bisection). Returns the
// accepted step; on failure falls back to plain Armijo backtracking, which
// always succeeds on a descent direction.
template <typename Eval>
double wolfe_search(Eval&& eval, double f0, double g0, double& f_out) {
    constexpr double c1 = 1e-4, c2 = 0.9;
    double alpha_prev = 0.0, f_prev = f0;
    double alpha = 1.0;
    double lo = 0.0, hi = 0.0, f_lo = f0;
    bool bracketed = false;
    for (int it = 0; it < 20 && !bracketed; ++it) {
        double g_alpha;
        const double f_alpha = eval(alpha, g_alpha);
        if (f_alpha > f0 + c1 * alpha * g0 || (it > 0 && f_alpha >= f_prev)) {
            lo = alpha_prev; f_lo = f_prev; hi = alpha;
            bracketed = true;
            break;
        }
        if (std::abs(g_alpha) <= -c2 * g0) { f_out = f_alpha; return alpha; }
        if (g_alpha >= 0.0) {
            lo = alpha; f_lo = f_alpha; hi = alpha_prev;
            bracketed = true;
            break;
        }
        alpha_prev = alpha; f_prev = f_alpha;
        alpha *= 2.0;
    }
    if (bracketed) {
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            double g_mid;
            const double f_mid = eval(mid, g_mid);
            if (f_mid > f0 + c1 * mid * g0 || f_mid >= f_lo) {
                hi = mid;
            } else {
                if (std::abs(g_mid) <= -c2 * g0) { f_out = f_mid; return mid; }
                if (g_mid * (hi - lo) >= 0.0) hi = lo;
                lo = mid; f_lo = f_mid;
            }
        }
        if (f_lo < f0 && lo > 0.0) { f_out = f_lo; return lo; }
    }
    // Armijo fallback
    alpha = 1.0;
    for (int it = 0; it < 60; ++it) {
        double g_alpha;
        const double f_alpha = eval(alpha, g_alpha);
        if (f_alpha <= f0 + c1 * alpha * g0) { f_out = f_alpha; return alpha; }
        alpha *= 0.5;
    }
    f_out = f0;
    return 0.0;
}

} // namespace detail

/// Trains regularized logistic regression by limited-memory BFGS.
/// Deterministic: starts from zero (or the given warm start) and uses no
/// randomness. `history`, when non-null, receives the objective at every
/// accepted iterate.
inline TrainResult train_logistic(DataView data, const TrainConfig& cfg,
                                  const std::vector<double>* warm_start = nullptr,
                                  std::vector<double>* history = nullptr) {
    if (data.empty()) throw std::invalid_argument("train_logistic: empty slice");
    if (cfg.lambda <= 0.0) throw std::invalid_argument("train_logistic: lambda must be positive");
    const std::size_t d = data.dim;
    std::vector<double> w(d, 0.0);
    if (warm_start) {
        if (warm_start->size() != d) throw std::invalid_argument("train_logistic: warm start dimension");
        w = *warm_start;
    }

    std::vector<double> g(d), g_new(d), p(d), w_new(d);
    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;

    double f = logistic_objective(w, data, cfg.lambda, g);
    if (history) { history->clear(); history->push_back(f); }

    TrainResult best{w, f, detail::l2_norm(g), 0, false};
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        const double gnorm = detail::l2_norm(g);
        if (f <= best.objective) { best.weights = w; best.objective = f; best.grad_norm = gnorm; }
        if (gnorm <= cfg.grad_tol) { best.converged = true; break; }

        // two-loop recursion
        p.assign(g.begin(), g.end());
        const int k = static_cast<int>(s_hist.size());
        std::vector<double> alpha(k);
        for (int i = k - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], p);
            for (std::size_t j = 0; j < d; ++j) p[j] -= alpha[i] * y_hist[i][j];
        }
        if (k > 0) {
            const double yy = dot(y_hist[k - 1], y_hist[k - 1]);
            const double gamma = yy > 0.0 ? dot(s_hist[k - 1], y_hist[k - 1]) / yy : 1.0;
            for (double& v : p) v *= gamma;
        }
        for (int i = 0; i < k; ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], p);
            for (std::size_t j = 0; j < d; ++j) p[j] += (alpha[i] - beta) * s_hist[i][j];
        }
        for (double& v : p) v = -v;

        double dir_deriv = dot(g, p);
        if (dir_deriv >= 0.0) { // not a descent direction; reset to steepest descent
            for (std::size_t j = 0; j < d; ++j) p[j] = -g[j];
            dir_deriv = -dot(g, g);
            s_hist.clear(); y_hist.clear(); rho_hist.clear();
        }

        const auto eval = [&](double a, double& slope) {
            for (std::size_t j = 0; j < d; ++j) w_new[j] = w[j] + a * p[j];
            const double fv = logistic_objective(w_new, data, cfg.lambda, g_new);
            slope = dot(g_new, p);
            return fv;
        };
        double f_new = f;
        const double step = detail::wolfe_search(eval, f, dir_deriv, f_new);
        if (step <= 0.0) break; // line search failed; keep best iterate
        // re-evaluate at the accepted step so w_new/g_new/f_new are consistent
        for (std::size_t j = 0; j < d; ++j) w_new[j] = w[j] + step * p[j];
        f_new = logistic_objective(w_new, data, cfg.lambda, g_new);

        std::vector<double> s(d), yv(d);
        for (std::size_t j = 0; j < d; ++j) {
            s[j] = w_new[j] - w[j];
            yv[j] = g_new[j] - g[j];
        }
        const double sy = dot(s, yv);
        if (sy > 1e-12 * detail::l2_norm(s) * detail::l2_norm(yv)) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > cfg.memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        w.swap(w_new);
        g.swap(g_new);
        f = f_new;
        if (history) history->push_back(f);
    }
    if (f <= best.objective) {
        best.weights = w;
        best.objective = f;
        best.grad_norm = detail::l2_norm(g);
        best.converged = best.converged || best.grad_norm <= cfg.grad_tol;
    }
    best.iterations = iter;
    return best;
}

/// Mean 0-1 loss of a fixed weight vector over a data view.
inline double empirical_zero_one(std::span<const double> w, DataView data) {
    if (data.empty()) return 0.0;
    std::size_t errs = 0;
    for (std::size_t i = 0; i < data.rows; ++i)
        errs += static_cast<std::size_t>(zero_one_loss(w, data.row(i), data.y[i]));
    return static_cast<double>(errs) / static_cast<double>(data.rows);
}

} // namespace pacbayes
