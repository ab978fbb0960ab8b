#pragma once
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>

#include "pacbayes/rng.hpp"

// Bernoulli/categorical KL divergences, their inversions, the ternary inverse
// phi, the multinomial moment constant xi, and the standard relaxations.
// Everything here is a pure function of its arguments.
namespace pacbayes {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {
inline void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}
inline bool in_unit(double x) { return x >= 0.0 && x <= 1.0 && std::isfinite(x); }
} // namespace detail

/// kl(q || p) between Bernoulli(q) and Bernoulli(p), with the 0 log 0 = 0
/// convention. Returns +inf when p is degenerate and q differs from it.
inline double bern_kl(double q, double p) {
    detail::require(detail::in_unit(q), "bern_kl: q outside [0,1]");
    detail::require(detail::in_unit(p), "bern_kl: p outside [0,1]");
    if (q == p) return 0.0;
    if (p <= 0.0 || p >= 1.0) return kInf;
    double t = 0.0;
    if (q > 0.0) t += q * std::log(q / p);
    if (q < 1.0) t += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
    return t < 0.0 ? 0.0 : t; // guard rounding just below zero near q == p
}

/// Upper inversion: largest p in [q,1] with kl(q||p) <= b.
inline double bern_kl_inv_upper(double q, double b) {
    detail::require(detail::in_unit(q), "bern_kl_inv_upper: q outside [0,1]");
    detail::require(b >= 0.0 && std::isfinite(b), "bern_kl_inv_upper: bad budget");
    if (b == 0.0) return q;
    if (q >= 1.0) return 1.0;
    if (q == 0.0) return -std::expm1(-b); // kl(0||p) = -log(1-p)
    double lo = q, hi = 1.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (bern_kl(q, mid) <= b) lo = mid; else hi = mid;
    }
    return lo;
}

/// Lower inversion: smallest p in [0,q] with kl(q||p) <= b.
inline double bern_kl_inv_lower(double q, double b) {
    detail::require(detail::in_unit(q), "bern_kl_inv_lower: q outside [0,1]");
    detail::require(b >= 0.0 && std::isfinite(b), "bern_kl_inv_lower: bad budget");
    if (b == 0.0) return q;
    if (q <= 0.0) return 0.0;
    if (q == 1.0) return std::exp(-b); // kl(1||p) = -log p
    double lo = 0.0, hi = q;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (bern_kl(q, mid) <= b) hi = mid; else lo = mid;
    }
    return hi;
}

/// A point of the 3-simplex: the empirical error-type vector
/// [E+, E-, 1 - E+ - E-].
struct TernaryPoint {
    double e_plus = 0.0;
    double e_minus = 0.0;
    double rest = 1.0;

    TernaryPoint() = default;
    TernaryPoint(double p, double m, double r) : e_plus(p), e_minus(m), rest(r) {
        validate();
    }
    /// Builds from the two error types; rest is the remainder (rounding dust
    /// below zero clamps to 0, within the validation tolerance).
    static TernaryPoint from_errors(double p, double m) {
        double r = 1.0 - p - m;
        if (r < 0.0 && r > -1e-12) r = 0.0;
        return TernaryPoint(p, m, r);
    }

    void validate() const {
        detail::require(e_plus >= 0.0 && e_minus >= 0.0 && rest >= 0.0,
                        "TernaryPoint: negative component");
        detail::require(std::abs(e_plus + e_minus + rest - 1.0) <= 1e-12,
                        "TernaryPoint: components do not sum to 1");
    }
};

/// KL divergence between categorical distributions on 3 atoms, 0 log 0 = 0.
/// +inf when some v component vanishes where u does not.
inline double cat_kl(const TernaryPoint& u, const TernaryPoint& v) {
    const double us[3] = {u.e_plus, u.e_minus, u.rest};
    const double vs[3] = {v.e_plus, v.e_minus, v.rest};
    double t = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (us[i] > 0.0) {
            if (vs[i] <= 0.0) return kInf;
            t += us[i] * std::log(us[i] / vs[i]);
        }
    }
    return t < 0.0 ? 0.0 : t;
}

namespace detail {

// kl(u || r) restricted to the slice {r in simplex : r1 - r2 = v},
// parameterized by s = r2. Convex in s.
inline double slice_kl(const TernaryPoint& u, double v, double s) {
    double t = 0.0;
    const double r1 = v + s, r3 = 1.0 - v - 2.0 * s;
    if (u.e_plus > 0.0) {
        if (r1 <= 0.0) return kInf;
        t += u.e_plus * std::log(u.e_plus / r1);
    }
    if (u.e_minus > 0.0) {
        if (s <= 0.0) return kInf;
        t += u.e_minus * std::log(u.e_minus / s);
    }
    if (u.rest > 0.0) {
        if (r3 <= 0.0) return kInf;
        t += u.rest * std::log(u.rest / r3);
    }
    return t;
}

// min over the slice of kl(u || r) by golden-section search.
inline double slice_kl_min(const TernaryPoint& u, double v) {
    double a = v < 0.0 ? -v : 0.0;
    double b = 0.5 * (1.0 - v);
    if (b < a) return kInf;
    constexpr double gr = 0.6180339887498948482;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = slice_kl(u, v, c), fd = slice_kl(u, v, d);
    for (int i = 0; i < 120; ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a); fc = slice_kl(u, v, c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a); fd = slice_kl(u, v, d);
        }
    }
    return slice_kl(u, v, 0.5 * (a + b));
}

} // namespace detail

/// phi(u, b) = sup { r1 - r2 : r in simplex, kl(u || r) <= b }.
/// Outer bisection on the candidate value v; a candidate is feasible when the
/// kl minimum over the slice r1 - r2 = v is within budget (the feasible set of
/// v is an interval because the kl ball is convex).
inline double phi(const TernaryPoint& u, double b) {
    u.validate();
    detail::require(b >= 0.0 && std::isfinite(b), "phi: bad budget");
    const double v0 = u.e_plus - u.e_minus;
    if (b == 0.0) return v0;
    if (u.e_minus == 0.0) return bern_kl_inv_upper(u.e_plus, b); // r2 = 0 is free
    double lo = v0, hi = 1.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (detail::slice_kl_min(u, mid) <= b) lo = mid; else hi = mid;
    }
    return lo;
}

namespace detail {

// The increasing reparameterized constraint function whose root gives the
// KKT multiplier of the phi program.
inline double phi_f(const TernaryPoint& u, double s) {
    return std::log(u.e_plus + u.e_minus / (1.0 + 2.0 * s) + u.rest / (1.0 + s))
         + u.e_minus * std::log1p(2.0 * s) + u.rest * std::log1p(s);
}

} // namespace detail

/// Closed-form evaluation of phi for interior u and b > 0: root-find the
/// multiplier s* with f_u(s*) = b (bracket doubling + bisection), then
/// evaluate the stationary-point ratio at t = -1 - 1/s*. Must agree with
/// phi(); see phi_fast() for the validated dispatch.
inline double phi_closed_form(const TernaryPoint& u, double b) {
    u.validate();
    detail::require(u.e_plus > 0.0 && u.e_minus > 0.0 && u.rest > 0.0,
                    "phi_closed_form: u must be interior");
    detail::require(b > 0.0 && std::isfinite(b), "phi_closed_form: b must be positive");
    double hi = 1.0;
    while (detail::phi_f(u, hi) < b) {
        hi *= 2.0;
        if (hi > 1e300) break;
    }
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= 1e-10 * (1.0 + mid)) break;
        if (detail::phi_f(u, mid) < b) lo = mid; else hi = mid;
    }
    const double s = 0.5 * (lo + hi);
    const double t = -1.0 - 1.0 / s;
    const double a1 = u.e_plus / (t + 1.0);
    const double a2 = u.e_minus / (t - 1.0);
    const double a3 = u.rest / t;
    return (a1 - a2) / (a1 + a2 + a3);
}

namespace detail {

// One-time agreement sweep between the closed form and the normative solver.
inline bool phi_closed_form_validated() {
    static std::once_flag flag;
    static bool ok = false;
    std::call_once(flag, [] {
        const std::uint64_t key = rng::stream_key(0x9aCBa7e5, 41);
        bool pass = true;
        for (int i = 0; i < 100 && pass; ++i) {
            const double a = rng::uniform_pos(key, 4 * i);
            const double b_ = rng::uniform_pos(key, 4 * i + 1);
            const double c = rng::uniform_pos(key, 4 * i + 2);
            const double s = a + b_ + c;
            const TernaryPoint u = TernaryPoint::from_errors(a / s, b_ / s);
            const double budget = std::pow(10.0, -4.0 + 4.0 * rng::uniform(key, 4 * i + 3));
            pass = std::abs(phi_closed_form(u, budget) - phi(u, budget)) <= 1e-6;
        }
        ok = pass;
    });
    return ok;
}

} // namespace detail

/// Whether the closed form passed its startup agreement sweep against the
/// normative solver (when it has not, phi_fast runs the solver everywhere).
inline bool phi_closed_form_enabled() { return detail::phi_closed_form_validated(); }

/// phi via the closed form when it has passed the validation sweep and u is
/// interior; the normative solver otherwise.
inline double phi_fast(const TernaryPoint& u, double b) {
    if (b > 0.0 && u.e_plus > 0.0 && u.e_minus > 0.0 && u.rest > 0.0 &&
        phi_closed_form_enabled()) {
        return phi_closed_form(u, b);
    }
    return phi(u, b);
}

/// log of the multinomial moment constant xi(M, m):
///   sqrt(pi) e^{1/12m} (m/2)^{(M-1)/2} sum_{k=0}^{M-1} C(M,k) / ((m pi)^{k/2} Gamma((M-k)/2))
inline double log_xi(int M, std::int64_t m) {
    detail::require(M >= 1 && m >= M, "xi: requires m >= M >= 1");
    const double md = static_cast<double>(m);
    const double pi = 3.14159265358979323846;
    // log-sum-exp over the k terms
    double max_t = -kInf;
    double terms[64];
    detail::require(M <= 64, "xi: M too large");
    for (int k = 0; k < M; ++k) {
        const double log_binom = std::lgamma(M + 1.0) - std::lgamma(k + 1.0) - std::lgamma(M - k + 1.0);
        const double t = log_binom - 0.5 * k * std::log(md * pi) - std::lgamma(0.5 * (M - k));
        terms[k] = t;
        if (t > max_t) max_t = t;
    }
    double acc = 0.0;
    for (int k = 0; k < M; ++k) acc += std::exp(terms[k] - max_t);
    return 0.5 * std::log(pi) + 1.0 / (12.0 * md)
         + 0.5 * (M - 1) * std::log(0.5 * md) + max_t + std::log(acc);
}

/// xi(M, m) itself; evaluated in log space to avoid overflow.
inline double xi(int M, std::int64_t m) { return std::exp(log_xi(M, m)); }

/// Maurer-style relaxation of the upper inversion: q + sqrt(2bq) + 2b,
/// clipped to 1 for reporting.
inline double maurer_relaxation(double q, double b) {
    detail::require(detail::in_unit(q), "maurer_relaxation: q outside [0,1]");
    detail::require(b >= 0.0 && std::isfinite(b), "maurer_relaxation: bad budget");
    const double v = q + std::sqrt(2.0 * b * q) + 2.0 * b;
    return v > 1.0 ? 1.0 : v;
}

/// Relaxed excess bound: u1 - u2 + 2 sqrt(b (u1 + u2)) + 2b.
inline double relaxed_excess(double u1, double u2, double b) {
    detail::require(u1 >= 0.0 && u2 >= 0.0 && u1 + u2 <= 1.0 + 1e-12,
                    "relaxed_excess: bad error pair");
    detail::require(b >= 0.0 && std::isfinite(b), "relaxed_excess: bad budget");
    return u1 - u2 + 2.0 * std::sqrt(b * (u1 + u2)) + 2.0 * b;
}

/// c_eta = -(eta + log(1-eta)) / eta, positive and increasing on (0,1).
inline double c_eta(double eta) {
    detail::require(eta > 0.0 && eta < 1.0, "c_eta: eta outside (0,1)");
    return -(eta + std::log1p(-eta)) / eta;
}

/// Upper bound on kl^{-1}(q||b) via inf over eta in (0,1) of
/// (1 + c_eta) q + b / eta. The objective is quasiconvex, so golden-section
/// search finds the infimum.
inline double ub_relaxed_kl_inv(double q, double b) {
    detail::require(q >= 0.0 && q < 1.0, "ub_relaxed_kl_inv: q outside [0,1)");
    detail::require(b > 0.0 && std::isfinite(b), "ub_relaxed_kl_inv: b must be positive");
    const auto obj = [&](double eta) { return (1.0 + c_eta(eta)) * q + b / eta; };
    double a = 1e-12, d = 1.0 - 1e-12;
    constexpr double gr = 0.6180339887498948482;
    double c1 = d - gr * (d - a), c2 = a + gr * (d - a);
    double f1 = obj(c1), f2 = obj(c2);
    for (int i = 0; i < 160; ++i) {
        if (f1 < f2) {
            d = c2; c2 = c1; f2 = f1;
            c1 = d - gr * (d - a); f1 = obj(c1);
        } else {
            a = c1; c1 = c2; f1 = f2;
            c2 = a + gr * (d - a); f2 = obj(c2);
        }
    }
    return obj(0.5 * (a + d));
}

} // namespace pacbayes
