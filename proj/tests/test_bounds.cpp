#include <doctest.h>

#include <cmath>
#include <vector>

#include "pacbayes/bounds.hpp"
#include "pacbayes/rng.hpp"
#include "pacbayes/verify.hpp"

using namespace pacbayes;

namespace {

BoundInputs sample_inputs(std::uint64_t key, std::uint64_t i) {
    const double e1 = -std::log(rng::uniform_pos(key, 8 * i));
    const double e2 = -std::log(rng::uniform_pos(key, 8 * i + 1));
    const double e3 = -std::log(rng::uniform_pos(key, 8 * i + 2));
    const double s = e1 + e2 + e3;
    BoundInputs in;
    in.profile = TernaryPoint::from_errors(e1 / s, e2 / s);
    in.kl_complexity = 30.0 * rng::uniform(key, 8 * i + 3);
    in.m = 100 + static_cast<std::size_t>(rng::below(key, 8 * i + 4, 5000));
    in.delta = 0.05;
    in.online_mean = rng::uniform(key, 8 * i + 5);
    in.ub_variance = clip01(in.profile.e_plus + in.profile.e_minus);
    in.empirical_loss = clip01(in.profile.e_plus - in.profile.e_minus + in.online_mean);
    return in;
}

} // namespace

TEST_CASE("maurer closed form at zero empirical loss") {
    const std::size_t m = 500;
    const double delta = 0.05;
    const double expect = 1.0 - std::pow(delta / (2.0 * std::sqrt(static_cast<double>(m))),
                                         1.0 / static_cast<double>(m));
    CHECK(maurer_bound(0.0, 0.0, m, delta) == doctest::Approx(expect).epsilon(1e-10));
    // saturation when the complexity blows up
    CHECK(maurer_bound(0.1, 1e9, m, delta) == doctest::Approx(1.0).epsilon(1e-9));
    // budget arithmetic round-trip
    const double v = maurer_bound(0.1, 10.0, 1000, delta);
    const double budget = (10.0 + std::log(2.0 * std::sqrt(1000.0) / delta)) / 1000.0;
    CHECK(bern_kl(0.1, v) == doctest::Approx(budget).epsilon(1e-8));
}

TEST_CASE("ternary excess bound") {
    // profile on the u2 = 0 edge recovers the small-kl inversion with lg = log(2m/delta)
    const double lhat = 0.12, kl_c = 5.0, delta = 0.05;
    const std::size_t m = 800;
    const TernaryPoint edge(lhat, 0.0, 1.0 - lhat);
    const double budget = (kl_c + std::log(2.0 * m / delta)) / static_cast<double>(m);
    CHECK(ternary_excess_bound(edge, kl_c, m, delta) ==
          doctest::Approx(bern_kl_inv_upper(lhat, budget)).epsilon(1e-9));
    // zero budget edge
    const TernaryPoint u(0.3, 0.2, 0.5);
    CHECK(phi(u, 0.0) == doctest::Approx(0.1).epsilon(1e-12));
    // dominance against the relaxation in the positive regime
    const std::uint64_t key = rng::stream_key(23, 1);
    for (int i = 0; i < 200; ++i) {
        const BoundInputs in = sample_inputs(key, i);
        const double b = (in.kl_complexity + std::log(2.0 * in.m / in.delta)) / in.m;
        const double v = ternary_excess_bound(in.profile, in.kl_complexity, in.m, in.delta);
        if (v > 0.0)
            CHECK(v <= relaxed_excess(in.profile.e_plus, in.profile.e_minus, b) + 1e-9);
    }
}

TEST_CASE("chernoff and online-loss bounds") {
    const std::size_t m = 200;
    const double delta = 0.05;
    const double expect = 1.0 - std::pow(delta, 1.0 / static_cast<double>(m));
    CHECK(chernoff_test_bound(0.0, m, delta) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(online_loss_bound(0.0, m, delta) == doctest::Approx(expect).epsilon(1e-10));
    // round-trip: kl(L, bound) returns the budget
    const double v = chernoff_test_bound(0.2, m, delta);
    CHECK(bern_kl(0.2, v) == doctest::Approx(std::log(1.0 / delta) / m).epsilon(1e-8));
    // degenerate constant sequence: the online bound is the i.i.d. one
    CHECK(online_loss_bound(0.37, m, delta) == chernoff_test_bound(0.37, m, delta));
}

TEST_CASE("full_bound_ours structure") {
    BoundInputs in;
    in.profile = TernaryPoint(0.08, 0.0, 0.92);
    in.kl_complexity = 12.0;
    in.m = 1500;
    in.delta = 0.05;
    in.online_mean = 0.0;
    in.ub_variance = 0.08;
    in.empirical_loss = 0.08;
    const BoundReport r = full_bound_ours(in);
    CHECK(r.bound_name == "ours");
    // delta accounting sums to the configured delta
    double dsum = 0.0;
    for (const auto& [k, v] : r.delta_split) dsum += v;
    CHECK(dsum == doctest::Approx(in.delta).epsilon(1e-15));
    // with zero debiasing the phi term is exactly the small-kl inversion at
    // budget log(4m/delta) and the online term the zero-loss inversion
    const double md = static_cast<double>(in.m);
    const double phi_term = bern_kl_inv_upper(0.08, (12.0 + std::log(4.0 * md / 0.05)) / md);
    const double online_term = 1.0 - std::pow(0.05 / 2.0, 1.0 / md);
    CHECK(r.components[0].second == doctest::Approx(phi_term).epsilon(1e-9));
    CHECK(r.components[1].second == doctest::Approx(online_term).epsilon(1e-9));
    CHECK(r.value == doctest::Approx(phi_term + online_term).epsilon(1e-9));
    // exact algebraic relation to maurer: same inversion, different budgets
    const double maurer = maurer_bound(0.08, 12.0, in.m, in.delta);
    CHECK(phi_term >= maurer); // log(4m) > log(2 sqrt(m))
}

TEST_CASE("bounds are monotone in the complexity, delta, and m directions") {
    const std::uint64_t key = rng::stream_key(23, 2);
    for (int i = 0; i < 100; ++i) {
        BoundInputs in = sample_inputs(key, i);
        BoundInputs more_kl = in;
        more_kl.kl_complexity += 5.0;
        BoundInputs smaller_delta = in;
        smaller_delta.delta = in.delta / 4.0;
        BoundInputs more_data = in;
        more_data.m = in.m * 10;
        for (auto f : {+[](const BoundInputs& x) { return full_bound_ours(x).value; },
                       +[](const BoundInputs& x) { return full_bound_ub(x).value; },
                       +[](const BoundInputs& x) { return full_bound_split_kl(x).value; },
                       +[](const BoundInputs& x) { return maurer_report(x).value; }}) {
            CHECK(f(more_kl) >= f(in) - 1e-12);
            CHECK(f(smaller_delta) >= f(in) - 1e-12);
            CHECK(f(more_data) <= f(in) + 1e-12);
        }
    }
}

TEST_CASE("ub grid construction") {
    // m=1000, delta=0.05: K = ceil(log2(0.5 sqrt(1000/log 20))) = 4
    const auto grid = ub_eta_grid(1000, 0.05);
    REQUIRE(grid.size() == 4);
    CHECK(grid == std::vector<double>{0.5, 0.25, 0.125, 0.0625});
    // tiny m still yields at least one point
    CHECK(ub_eta_grid(4, 0.5).size() == 1);
}

TEST_CASE("ub_excess_bound behavior") {
    BoundInputs in;
    in.profile = TernaryPoint(0.1, 0.05, 0.85);
    in.kl_complexity = 8.0;
    in.m = 2000;
    in.delta = 0.05;
    in.online_mean = 0.2;
    in.ub_variance = 0.15;
    in.empirical_loss = 0.25;
    // V = 0 and eta near 1: the bound tends to Ehat + (KL + log(1/delta))/m
    BoundInputs v0 = in;
    v0.ub_variance = 0.0;
    const double eta = 0.999999;
    const double expect = (0.25 - 0.2) + (8.0 + std::log(20.0)) / (2000.0 * eta);
    CHECK(ub_excess_bound(v0, eta) == doctest::Approx(expect).epsilon(1e-9));
    // the grid minimum is interior for typical inputs
    const auto grid = ub_eta_grid(in.m, in.delta);
    std::vector<double> vals;
    for (double e : grid) vals.push_back(ub_excess_bound(in, e));
    std::size_t best = 0;
    for (std::size_t j = 1; j < vals.size(); ++j)
        if (vals[j] < vals[best]) best = j;
    CHECK(best > 0);
    CHECK(best + 1 < vals.size());
}

TEST_CASE("full_bound_ub records the argmin eta and the grid size") {
    BoundInputs in;
    in.profile = TernaryPoint(0.1, 0.03, 0.87);
    in.kl_complexity = 15.0;
    in.m = 1000;
    in.delta = 0.05;
    in.online_mean = 0.12;
    in.ub_variance = 0.13;
    in.empirical_loss = 0.19;
    const BoundReport r = full_bound_ub(in);
    double eta = 0.0, K = 0.0, bernstein = kInf;
    for (const auto& [k, v] : r.components) {
        if (k == "eta") eta = v;
        if (k == "grid_size") K = v;
        if (k == "bernstein_term") bernstein = v;
    }
    CHECK(K == 4.0);
    // recompute the recorded minimum
    double best = kInf;
    for (double e : ub_eta_grid(in.m, in.delta))
        best = std::min(best, c_eta(e) * in.ub_variance +
                                  (in.kl_complexity + std::log(2.0 * K / in.delta)) /
                                      (static_cast<double>(in.m) * e));
    CHECK(bernstein == doctest::Approx(best).epsilon(1e-12));
    CHECK((eta == 0.5 || eta == 0.25 || eta == 0.125 || eta == 0.0625));
    double dsum = 0.0;
    for (const auto& [k, v] : r.delta_split) dsum += v;
    CHECK(dsum == doctest::Approx(in.delta).epsilon(1e-15));
}

TEST_CASE("ub alternative online bound dominances") {
    // online_mean 0: minimized by the largest eta in the grid
    BoundInputs in;
    in.profile = TernaryPoint(0.0, 0.0, 1.0);
    in.kl_complexity = 3.0;
    in.m = 1000;
    in.delta = 0.05;
    in.online_mean = 0.0;
    in.ub_variance = 0.0;
    in.empirical_loss = 0.0;
    const auto grid = ub_eta_grid(in.m, in.delta);
    const double expect = (3.0 + std::log(grid.size() / 0.05)) / (1000.0 * 0.5);
    CHECK(ub_alternative_online_bound(in) == doctest::Approx(expect).epsilon(1e-12));

    const std::uint64_t key = rng::stream_key(23, 3);
    for (int i = 0; i < 200; ++i) {
        BoundInputs r = sample_inputs(key, i);
        r.kl_complexity = std::max(r.kl_complexity, 1e-3);
        const double alt = ub_alternative_online_bound(r);
        CHECK(alt > ub_relaxed_kl_inv(r.online_mean, std::log(1.0 / r.delta) / r.m));
        CHECK(alt > online_loss_bound(r.online_mean, r.m, r.delta));
    }
}

TEST_CASE("split_kl bound") {
    // E- = 0: the lower inversion of 0 is 0, leaving the upper inversion alone
    const TernaryPoint u(0.2, 0.0, 0.8);
    const double kl_c = 4.0, delta = 0.05;
    const std::size_t m = 600;
    const double b = (kl_c + std::log(2.0 * m / delta)) / static_cast<double>(m);
    CHECK(split_kl_bound(u, kl_c, m, delta) ==
          doctest::Approx(bern_kl_inv_upper(0.2, b)).epsilon(1e-10));
    // budget 0 edge via kl_complexity = 0 and huge m is approximated by b -> 0:
    const TernaryPoint w(0.3, 0.1, 0.6);
    CHECK(split_kl_bound(w, 0.0, 100000000, delta) == doctest::Approx(0.2).epsilon(1e-3));
    // dominance over the joint phi bound
    const auto r = verify::check_dominance_split_kl(300);
    INFO(r.detail);
    CHECK(r.pass);
}

TEST_CASE("optimize_sigma picks the grid minimizer") {
    const std::uint64_t key = rng::stream_key(23, 4);
    std::vector<SigmaCandidate> cands;
    for (int j = 0; j < 6; ++j) {
        SigmaCandidate c;
        c.sigma2 = std::pow(0.5, j + 1);
        c.inputs = sample_inputs(key, j);
        cands.push_back(c);
    }
    const auto [sigma2, report] = optimize_sigma(cands, full_bound_ours);
    double best = kInf;
    double best_sigma = 0.0;
    for (const auto& c : cands) {
        const double v = full_bound_ours(c.inputs).value;
        if (v < best) { best = v; best_sigma = c.sigma2; }
    }
    CHECK(report.value == best);
    CHECK(sigma2 == best_sigma);

    // single-element grid returns that element
    std::vector<SigmaCandidate> one(cands.begin(), cands.begin() + 1);
    const auto [s1, r1] = optimize_sigma(one, full_bound_ours);
    CHECK(s1 == one.front().sigma2);
    CHECK(r1.value == full_bound_ours(one.front().inputs).value);

    CHECK_THROWS_AS(optimize_sigma({}, full_bound_ours), std::invalid_argument);
}

TEST_CASE("coverage simulations hold at the configured delta") {
    const auto iid = verify::check_coverage_iid(100, 0.05, 2000);
    INFO(iid.detail);
    CHECK(iid.pass);
    const auto mart = verify::check_coverage_martingale(100, 0.05, 2000);
    INFO(mart.detail);
    CHECK(mart.pass);
}
