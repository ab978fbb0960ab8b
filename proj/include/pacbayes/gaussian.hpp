#pragma once
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pacbayes/kl.hpp"
#include "pacbayes/logistic.hpp"
#include "pacbayes/rng.hpp"

// Isotropic Gaussian posteriors over weights: KL to the zero-mean prior and
// Monte Carlo estimates of expected losses and error-type profiles.
//
// Weight draw k is defined as mean + sigma * xi_k, where xi_k[j] is the
// standard normal produced by the counter-based stream at index k*dim + j.
// The draws therefore depend only on (seed, k, j), never on evaluation order.
namespace pacbayes {

struct GaussianPosterior {
    std::vector<double> mean;
    double variance = 1.0; // sigma^2, isotropic

    void validate() const {
        if (!(variance > 0.0)) throw std::invalid_argument("GaussianPosterior: variance must be positive");
        for (double v : mean)
            if (!std::isfinite(v)) throw std::invalid_argument("GaussianPosterior: non-finite mean");
    }
};

struct GaussianPrior {
    double variance = 1.0; // sigma_0^2, mean fixed at zero

    void validate() const {
        if (!(variance > 0.0)) throw std::invalid_argument("GaussianPrior: variance must be positive");
    }
};

/// Closed-form KL( N(mean, s2 I) || N(0, s02 I) )
///   = [ d s2/s02 + ||mean||^2/s02 - d + d log(s02/s2) ] / 2.
inline double gaussian_kl(const GaussianPosterior& rho, const GaussianPrior& pi) {
    rho.validate();
    pi.validate();
    const double d = static_cast<double>(rho.mean.size());
    double msq = 0.0;
    for (double v : rho.mean) msq += v * v;
    const double ratio = rho.variance / pi.variance;
    const double kl = 0.5 * (d * ratio + msq / pi.variance - d + d * std::log(1.0 / ratio));
    return kl < 0.0 ? 0.0 : kl;
}

namespace detail {

inline constexpr std::uint64_t kMcStream = 0x6d63; // draws for MC loss estimation

// xi_k[j] for the draw stream
inline void fill_standard_normals(std::uint64_t key, std::uint64_t draw,
                                  std::span<double> out) {
    const std::uint64_t base = draw * out.size();
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = rng::normal(key, base + j);
}

// Kahan-compensated accumulator
struct Kahan {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        const double t = x - comp;
        const double s = sum + t;
        comp = (s - sum) - t;
        sum = s;
    }
};

} // namespace detail

/// Per-example Monte Carlo mean 0-1 losses under weight draws from rho.
/// Deterministic given (seed, n_samples).
inline std::vector<double> mc_expected_losses(const GaussianPosterior& rho, DataView data,
                                              int n_samples, std::uint64_t seed) {
    rho.validate();
    if (n_samples < 1) throw std::invalid_argument("mc_expected_losses: n_samples must be >= 1");
    if (rho.mean.size() != data.dim) throw std::invalid_argument("mc_expected_losses: dimension mismatch");
    const std::uint64_t key = rng::stream_key(seed, detail::kMcStream);
    const double sigma = std::sqrt(rho.variance);
    std::vector<double> sums(data.rows, 0.0);
    std::vector<double> w(data.dim);
    for (int k = 0; k < n_samples; ++k) {
        detail::fill_standard_normals(key, static_cast<std::uint64_t>(k), w);
        for (std::size_t j = 0; j < data.dim; ++j) w[j] = rho.mean[j] + sigma * w[j];
        for (std::size_t i = 0; i < data.rows; ++i)
            sums[i] += zero_one_loss(w, data.row(i), data.y[i]);
    }
    for (double& s : sums) s /= n_samples;
    return sums;
}

/// Result of an error-profile estimate; mean_loss and mean_debias are the
/// matching per-draw averages so that profile.e_plus - profile.e_minus ==
/// mean_loss - mean_debias holds as a per-draw identity.
struct McProfile {
    TernaryPoint profile;
    double mean_loss = 0.0;
    double mean_debias = 0.0;
};

/// Monte Carlo estimate of the error-type vector [E+, E-, rest] against the
/// per-example de-biasing values. Both error types use the same weight draws.
inline McProfile mc_error_profile(const GaussianPosterior& rho, DataView data,
                                  std::span<const double> debias, int n_samples,
                                  std::uint64_t seed) {
    rho.validate();
    if (n_samples < 1) throw std::invalid_argument("mc_error_profile: n_samples must be >= 1");
    if (debias.size() != data.rows) throw std::invalid_argument("mc_error_profile: debias size mismatch");
    for (double v : debias)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("mc_error_profile: debias outside [0,1]");
    const std::uint64_t key = rng::stream_key(seed, detail::kMcStream);
    const double sigma = std::sqrt(rho.variance);
    detail::Kahan plus, minus, loss_sum;
    std::vector<double> w(data.dim);
    for (int k = 0; k < n_samples; ++k) {
        detail::fill_standard_normals(key, static_cast<std::uint64_t>(k), w);
        for (std::size_t j = 0; j < data.dim; ++j) w[j] = rho.mean[j] + sigma * w[j];
        for (std::size_t i = 0; i < data.rows; ++i) {
            const double l = zero_one_loss(w, data.row(i), data.y[i]);
            const double t = l - debias[i];
            plus.add(t > 0.0 ? t : 0.0);
            minus.add(t < 0.0 ? -t : 0.0);
            loss_sum.add(l);
        }
    }
    const double denom = static_cast<double>(n_samples) * static_cast<double>(data.rows);
    detail::Kahan dsum;
    for (double v : debias) dsum.add(v);
    McProfile out;
    const double ep = plus.sum / denom, em = minus.sum / denom;
    out.profile = TernaryPoint::from_errors(ep, em);
    out.mean_loss = loss_sum.sum / denom;
    out.mean_debias = dsum.sum / static_cast<double>(data.rows);
    return out;
}

/// Evaluates error profiles for a whole sigma^2 grid in one pass over the
/// draws, reusing the same standard normal perturbations for every grid
/// point (the posterior mean is shared; only sigma changes).
class McGridEvaluator {
public:
    McGridEvaluator(std::span<const double> mean, DataView data, int n_draws, std::uint64_t seed)
        : data_(data), n_draws_(n_draws), key_(rng::stream_key(seed, detail::kMcStream)) {
        if (n_draws < 1) throw std::invalid_argument("McGridEvaluator: n_draws must be >= 1");
        if (mean.size() != data.dim) throw std::invalid_argument("McGridEvaluator: dimension mismatch");
        mean_score_.resize(data.rows);
        for (std::size_t i = 0; i < data.rows; ++i)
            mean_score_[i] = dot(mean, data.row(i));
    }

    /// One McProfile per sigma^2 in `sigma2s`, all from the same draws.
    std::vector<McProfile> profiles(std::span<const double> sigma2s,
                                    std::span<const double> debias) const {
        if (debias.size() != data_.rows)
            throw std::invalid_argument("McGridEvaluator: debias size mismatch");
        const std::size_t J = sigma2s.size();
        std::vector<double> sigma(J);
        for (std::size_t j = 0; j < J; ++j) {
            if (!(sigma2s[j] > 0.0)) throw std::invalid_argument("McGridEvaluator: sigma^2 must be positive");
            sigma[j] = std::sqrt(sigma2s[j]);
        }
        std::vector<double> plus(J, 0.0), minus(J, 0.0), loss(J, 0.0);
        std::vector<double> xi(data_.dim), g(data_.rows);
        for (int k = 0; k < n_draws_; ++k) {
            detail::fill_standard_normals(key_, static_cast<std::uint64_t>(k), xi);
            for (std::size_t i = 0; i < data_.rows; ++i)
                g[i] = dot(xi, data_.row(i));
            for (std::size_t i = 0; i < data_.rows; ++i) {
                const double a = mean_score_[i], gi = g[i];
                const int yi = data_.y[i];
                const double ls = debias[i];
                for (std::size_t j = 0; j < J; ++j) {
                    const int pred = a + sigma[j] * gi > 0.0 ? 1 : 0;
                    const double l = pred != yi ? 1.0 : 0.0;
                    const double t = l - ls;
                    if (t > 0.0) plus[j] += t; else minus[j] -= t;
                    loss[j] += l;
                }
            }
        }
        const double denom = static_cast<double>(n_draws_) * static_cast<double>(data_.rows);
        double dsum = 0.0;
        for (double v : debias) dsum += v;
        std::vector<McProfile> out(J);
        for (std::size_t j = 0; j < J; ++j) {
            const double ep = plus[j] / denom, em = minus[j] / denom;
            out[j].profile = TernaryPoint::from_errors(ep, em);
            out[j].mean_loss = loss[j] / denom;
            out[j].mean_debias = dsum / static_cast<double>(data_.rows);
        }
        return out;
    }

private:
    DataView data_;
    int n_draws_;
    std::uint64_t key_;
    std::vector<double> mean_score_;
};

} // namespace pacbayes
