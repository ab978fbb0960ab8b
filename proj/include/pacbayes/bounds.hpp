#pragma once
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pacbayes/kl.hpp"

// Assembly of every bound used in the experiments from the kl primitives and
// the Monte Carlo statistics: Maurer, the ternary excess bound, the
// Chernoff-Hoeffding and martingale online-loss bounds, the combined
// generalisation bounds, the unexpected-Bernstein family, and split-kl.
namespace pacbayes {

/// Empirical statistics feeding a bound evaluation.
struct BoundInputs {
    TernaryPoint profile;        // [E+, E-, rest] under the de-biasing values
    double kl_complexity = 0.0;  // KL(rho, pi)
    std::size_t m = 1;           // training examples
    double delta = 0.05;
    double online_mean = 0.0;    // mean de-biasing loss (1/m) sum l*_i
    double ub_variance = 0.0;    // V-hat; equals E+ + E- for 0-1 losses
    double empirical_loss = 0.0; // L-hat(rho)

    void validate() const {
        profile.validate();
        detail::require(kl_complexity >= 0.0, "BoundInputs: negative KL");
        detail::require(m >= 1, "BoundInputs: m must be >= 1");
        detail::require(delta > 0.0 && delta < 1.0, "BoundInputs: delta outside (0,1)");
        detail::require(online_mean >= 0.0 && online_mean <= 1.0, "BoundInputs: online_mean outside [0,1]");
        detail::require(ub_variance >= 0.0 && ub_variance <= 1.0, "BoundInputs: ub_variance outside [0,1]");
        detail::require(empirical_loss >= 0.0 && empirical_loss <= 1.0, "BoundInputs: empirical_loss outside [0,1]");
    }
};

/// Result record: reported value (clipped to [0,1] for risk reporting),
/// named components including the raw value, and the delta allocation.
struct BoundReport {
    std::string bound_name;
    double value = 0.0;
    std::vector<std::pair<std::string, double>> components;
    std::vector<std::pair<std::string, double>> delta_split;
};

inline double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

/// Maurer: kl^{-1}( L-hat || (KL + log(2 sqrt(m)/delta)) / m ).
inline double maurer_bound(double empirical_loss, double kl_complexity, std::size_t m, double delta) {
    const double md = static_cast<double>(m);
    const double budget = (kl_complexity + std::log(2.0 * std::sqrt(md) / delta)) / md;
    return bern_kl_inv_upper(empirical_loss, budget);
}

/// Excess-loss bound via the ternary inversion: phi(profile, (KL + log(2m/delta))/m).
inline double ternary_excess_bound(const TernaryPoint& profile, double kl_complexity,
                                    std::size_t m, double delta) {
    const double md = static_cast<double>(m);
    const double budget = (kl_complexity + std::log(2.0 * md / delta)) / md;
    return phi_fast(profile, budget);
}

/// Chernoff-Hoeffding test bound for a sample-independent predictor.
inline double chernoff_test_bound(double empirical_loss, std::size_t m, double delta) {
    const double budget = std::log(1.0 / delta) / static_cast<double>(m);
    return bern_kl_inv_upper(empirical_loss, budget);
}

/// Martingale bound on the averaged risk of the online estimators.
inline double online_loss_bound(double online_mean, std::size_t m, double delta) {
    const double budget = std::log(1.0 / delta) / static_cast<double>(m);
    return bern_kl_inv_upper(online_mean, budget);
}

/// Combined generalisation bound: phi term at budget (KL + log(4m/delta))/m
/// plus the online-loss inversion at log(2/delta)/m (delta split 1/2, 1/2).
inline BoundReport full_bound_ours(const BoundInputs& in) {
    in.validate();
    const double md = static_cast<double>(in.m);
    const double budget = (in.kl_complexity + std::log(4.0 * md / in.delta)) / md;
    const double excess = phi_fast(in.profile, budget);
    const double online = bern_kl_inv_upper(in.online_mean, std::log(2.0 / in.delta) / md);
    const double raw = excess + online;
    BoundReport r;
    r.bound_name = "ours";
    r.value = clip01(raw);
    r.components = {{"excess_phi", excess}, {"online_term", online},
                    {"phi_budget", budget}, {"raw", raw}};
    r.delta_split = {{"excess", in.delta / 2.0}, {"online", in.delta / 2.0}};
    return r;
}

/// Unexpected Bernstein excess-loss bound at a fixed eta.
inline double ub_excess_bound(const BoundInputs& in, double eta) {
    in.validate();
    const double md = static_cast<double>(in.m);
    const double excess_hat = in.empirical_loss - in.online_mean;
    return excess_hat + c_eta(eta) * in.ub_variance +
           (in.kl_complexity + std::log(1.0 / in.delta)) / (md * eta);
}

/// Geometric eta grid {1/2, ..., 1/2^K}, K = ceil(log2( sqrt(m/log(1/delta)) / 2 )).
inline std::vector<double> ub_eta_grid(std::size_t m, double delta) {
    const double arg = 0.5 * std::sqrt(static_cast<double>(m) / std::log(1.0 / delta));
    int K = static_cast<int>(std::ceil(std::log2(arg)));
    if (K < 1) K = 1;
    std::vector<double> grid(K);
    double v = 0.5;
    for (int k = 0; k < K; ++k, v *= 0.5) grid[k] = v;
    return grid;
}

/// Unexpected Bernstein generalisation bound: L-hat plus the grid-minimized
/// Bernstein excess term (union bound over the K grid points at delta/2) plus
/// the online-loss inversion at delta/2.
inline BoundReport full_bound_ub(const BoundInputs& in) {
    in.validate();
    const double md = static_cast<double>(in.m);
    const std::vector<double> grid = ub_eta_grid(in.m, in.delta);
    const double K = static_cast<double>(grid.size());
    double best = kInf, best_eta = grid.front();
    for (double eta : grid) {
        const double term = c_eta(eta) * in.ub_variance +
                            (in.kl_complexity + std::log(2.0 * K / in.delta)) / (md * eta);
        if (term < best) { best = term; best_eta = eta; }
    }
    const double online = bern_kl_inv_upper(in.online_mean, std::log(2.0 / in.delta) / md);
    const double raw = in.empirical_loss + best + online;
    BoundReport r;
    r.bound_name = "ub";
    r.value = clip01(raw);
    r.components = {{"empirical_loss", in.empirical_loss}, {"bernstein_term", best},
                    {"online_term", online}, {"eta", best_eta},
                    {"grid_size", K}, {"raw", raw}};
    r.delta_split = {{"bernstein", in.delta / 2.0}, {"online", in.delta / 2.0}};
    return r;
}

/// The alternative online-estimator loss bound (comparison only):
/// min over the eta grid of (1+c_eta) online_mean + (KL + log(|G|/delta))/(m eta).
inline double ub_alternative_online_bound(const BoundInputs& in) {
    in.validate();
    const double md = static_cast<double>(in.m);
    const std::vector<double> grid = ub_eta_grid(in.m, in.delta);
    const double G = static_cast<double>(grid.size());
    double best = kInf;
    for (double eta : grid) {
        const double v = (1.0 + c_eta(eta)) * in.online_mean +
                         (in.kl_complexity + std::log(G / in.delta)) / (md * eta);
        if (v < best) best = v;
    }
    return best;
}

/// Split-kl excess bound: kl^{-1}(E+ || b) - kl^{-1}_LB(E- || b) at
/// b = (KL + log(2m/delta))/m.
inline double split_kl_bound(const TernaryPoint& profile, double kl_complexity,
                             std::size_t m, double delta) {
    profile.validate();
    const double md = static_cast<double>(m);
    const double b = (kl_complexity + std::log(2.0 * md / delta)) / md;
    return bern_kl_inv_upper(profile.e_plus, b) - bern_kl_inv_lower(profile.e_minus, b);
}

/// Split-kl composed into a generalisation bound the same way as
/// full_bound_ours: excess budget log(4m/delta), online term log(2/delta).
inline BoundReport full_bound_split_kl(const BoundInputs& in) {
    in.validate();
    const double md = static_cast<double>(in.m);
    const double b = (in.kl_complexity + std::log(4.0 * md / in.delta)) / md;
    const double up = bern_kl_inv_upper(in.profile.e_plus, b);
    const double lo = bern_kl_inv_lower(in.profile.e_minus, b);
    const double online = bern_kl_inv_upper(in.online_mean, std::log(2.0 / in.delta) / md);
    const double raw = up - lo + online;
    BoundReport r;
    r.bound_name = "split_kl";
    r.value = clip01(raw);
    r.components = {{"upper_inv", up}, {"lower_inv", lo}, {"online_term", online}, {"raw", raw}};
    r.delta_split = {{"excess", in.delta / 2.0}, {"online", in.delta / 2.0}};
    return r;
}

/// Maurer packaged as a report, for uniform experiment plumbing.
inline BoundReport maurer_report(const BoundInputs& in) {
    in.validate();
    const double v = maurer_bound(in.empirical_loss, in.kl_complexity, in.m, in.delta);
    BoundReport r;
    r.bound_name = "maurer";
    r.value = clip01(v);
    r.components = {{"empirical_loss", in.empirical_loss}, {"raw", v}};
    r.delta_split = {{"total", in.delta}};
    return r;
}

/// One posterior candidate on the sigma^2 grid.
struct SigmaCandidate {
    double sigma2 = 0.0;
    BoundInputs inputs;
};

/// Evaluates the selected bound at every grid candidate and returns the
/// minimizer. No delta split across the grid: the bounds hold simultaneously
/// for all posteriors, so picking one is free.
inline std::pair<double, BoundReport> optimize_sigma(
    std::span<const SigmaCandidate> candidates,
    const std::function<BoundReport(const BoundInputs&)>& bound) {
    if (candidates.empty()) throw std::invalid_argument("optimize_sigma: empty grid");
    double best_sigma2 = candidates.front().sigma2;
    BoundReport best = bound(candidates.front().inputs);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        BoundReport r = bound(candidates[i].inputs);
        if (r.value < best.value) {
            best = std::move(r);
            best_sigma2 = candidates[i].sigma2;
        }
    }
    return {best_sigma2, best};
}

} // namespace pacbayes
