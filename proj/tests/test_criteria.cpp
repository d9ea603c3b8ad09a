#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "switchsel/criteria.hpp"
#include "switchsel/rng.hpp"
#include "switchsel/stats.hpp"

using namespace switchsel;

namespace {

NestedPair gauss_pair(double null_mu = 0.0) { return NestedPair(gaussian_location(), 0, {null_mu}); }

SwitchState gauss_switch_state(double mu0 = 0.0) {
    auto fam = gaussian_location();
    return SwitchState(MarginalState::point(fam, fam.mean_param({mu0})),
                       MarginalState::normal_mean(1.0, 0.0, 1.0));
}

}  // namespace

TEST_CASE("bfms_select") {
    MarginalState p0 = MarginalState::point(bernoulli_family(), bernoulli_family().mean_param({0.5}));
    MarginalState p1 = MarginalState::beta_bernoulli(1, 1);
    Decision d0 = bfms_select(p0, p1);
    CHECK(d0.selected == 0);  // tie at n = 0 goes to the simple model
    CHECK(d0.evidence == 1.0);

    p0.update(1);
    p1.update(1);
    p0.update(0);
    p1.update(0);
    Decision d = bfms_select(p0, p1);
    // p0 = 1/4; p1 = int mu(1-mu) dmu = 1/6 (Beta closed form)
    CHECK(std::exp(p1.log_marginal()) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(d.evidence == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(d.selected == 0);
    CHECK(d.n == 2);

    MarginalState lag = MarginalState::beta_bernoulli(1, 1);
    CHECK_THROWS_AS(bfms_select(p0, lag), MismatchedN);
}

TEST_CASE("aic_select") {
    NestedPair pair = gauss_pair();
    // log LR = n mu_hat^2 / 2 = 1 exactly: not > 1, simple model stays
    Decision d = aic_select({1, 1}, pair, 1.0);
    CHECK(d.evidence == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(d.selected == 0);

    Decision d2 = aic_select({1.2, 1.2}, pair, 1.0);
    CHECK(d2.selected == 1);

    CHECK_THROWS_AS(aic_select({1, 1, 1}, NestedPair(bernoulli_family(), 0, {0.5}), 1.0), UndefinedMLE);
}

TEST_CASE("aic glrt calibration is exact") {
    NestedPair pair = gauss_pair();
    CounterRng rng(42, 0);
    for (double alpha : {0.01, 0.05, 0.1}) {
        double t = aic_glrt_threshold(alpha);
        double z = normal_quantile(1.0 - alpha / 2.0);
        for (int rep = 0; rep < 200; ++rep) {
            int n = 2 + static_cast<int>(rng.next_unit() * 50);
            std::vector<double> xs;
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                xs.push_back(rng.next_normal(0.2, 1.0));
                s += xs.back();
            }
            bool glrt_rejects = std::abs(s) / std::sqrt(static_cast<double>(n)) > z;
            CHECK(aic_select(xs, pair, t).selected == (glrt_rejects ? 1 : 0));
        }
    }
    // the 2/z^2 form is looser than the exact calibration at these levels
    CHECK(aic_threshold_from_z(0.05) > aic_glrt_threshold(0.05));
}

TEST_CASE("bic_select") {
    NestedPair pair = gauss_pair();
    // n = 1: penalty log(1)/2 = 0, so the decision is the raw LR sign
    CHECK(bic_select({0.9}, pair).selected == 1);
    CHECK(bic_select({0.0}, pair).evidence == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(bic_select({0.0}, pair).selected == 0);

    // mu_hat = 0 at larger n: evidence is exactly -(1/2) log n
    Decision d = bic_select({1.0, -1.0, 2.0, -2.0}, pair);
    CHECK(d.evidence == doctest::Approx(-0.5 * std::log(4.0)).epsilon(1e-14));
    CHECK(d.selected == 0);
}

TEST_CASE("bic agrees with bfms on most null streams (diagnostic)") {
    const int streams = 1000, n = 1000;
    NestedPair pair = gauss_pair();
    int agree = 0;
    for (int s = 0; s < streams; ++s) {
        CounterRng rng(400, static_cast<std::uint64_t>(s));
        MarginalState p0 = MarginalState::point(pair.family, pair.null_point());
        MarginalState p1 = MarginalState::normal_mean(1.0, 0.0, 1.0);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = rng.next_normal(0.0, 1.0);
            p0.update(x);
            p1.update(x);
            sum += x;
        }
        double mu_hat = sum / n;
        double log_lr = 0.5 * n * mu_hat * mu_hat;
        int bic_sel = (log_lr - 0.5 * std::log(static_cast<double>(n))) > 0.0 ? 1 : 0;
        int bfms_sel = bfms_select(p0, p1).selected;
        if (bic_sel == bfms_sel) ++agree;
    }
    CHECK(static_cast<double>(agree) / streams > 0.95);
}

TEST_CASE("hq_select") {
    NestedPair pair = gauss_pair();
    CHECK_THROWS_AS(hq_select({1, 1}, pair, 1.0), NTooSmall);

    // threshold at n = 3, c = 1: log log 3
    Decision d = hq_select({0, 0, 0}, pair, 1.0);
    CHECK(d.evidence == doctest::Approx(-std::log(std::log(3.0))).epsilon(1e-12));
    CHECK(-d.evidence == doctest::Approx(0.0940478276166991).epsilon(1e-12));
    CHECK(d.selected == 0);

    // sum form: select 1 iff |sum x| >= sqrt(2 c n log log n)
    CounterRng rng(9, 9);
    for (int rep = 0; rep < 300; ++rep) {
        int n = 3 + static_cast<int>(rng.next_unit() * 60);
        double c = 0.5 + rng.next_unit() * 2.0;
        std::vector<double> xs;
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            xs.push_back(rng.next_normal(0.1, 1.0));
            s += xs.back();
        }
        bool sum_form = std::abs(s) >= std::sqrt(2.0 * c * n * std::log(std::log(static_cast<double>(n))));
        CHECK(hq_select(xs, pair, c).selected == (sum_form ? 1 : 0));
    }
}

TEST_CASE("hq consistency contrast between c > 1 and c < 1") {
    const int streams = 51;
    const std::int64_t horizon = 10000;
    std::vector<std::int64_t> count_hi, count_lo;
    for (int s = 0; s < streams; ++s) {
        CounterRng rng(600, static_cast<std::uint64_t>(s));
        double sum = 0.0;
        std::int64_t chi = 0, clo = 0;
        for (std::int64_t n = 1; n <= horizon; ++n) {
            sum += rng.next_normal(0.0, 1.0);
            if (n < 10) continue;
            double lr = 0.5 * sum * sum / static_cast<double>(n);
            double llg = std::log(std::log(static_cast<double>(n)));
            if (lr - 1.5 * llg >= 0.0) ++chi;
            if (lr - 0.5 * llg >= 0.0) ++clo;
        }
        count_hi.push_back(chi);
        count_lo.push_back(clo);
    }
    std::sort(count_hi.begin(), count_hi.end());
    std::sort(count_lo.begin(), count_lo.end());
    CHECK(count_lo[streams / 2] > count_hi[streams / 2]);
}

TEST_CASE("switch_select wraps delta_sw") {
    SwitchState fresh = gauss_switch_state();
    Decision d0 = switch_select(fresh);
    CHECK(d0.evidence == 1.0);
    CHECK(d0.selected == 0);

    CounterRng rng(31, 5);
    for (int rep = 0; rep < 100; ++rep) {
        SwitchState s = gauss_switch_state();
        int len = 1 + static_cast<int>(rng.next_unit() * 60);
        for (int i = 0; i < len; ++i) s.update(rng.next_normal(0.5, 1.0));
        Decision d = switch_select(s);
        CHECK(d.selected == s.select());
        CHECK(d.evidence == doctest::Approx(s.r_sw()).epsilon(1e-13));
        if (d.evidence <= 0.5) CHECK(d.selected == 1);  // evidence <= alpha < 1 forces the complex model
        CHECK((d.selected == 0 || d.selected == 1));
        CHECK(std::isfinite(d.evidence));
    }
}

TEST_CASE("robust test wrapper") {
    CHECK_THROWS_AS(RobustTest(CriterionKind::AIC, 0.05), NotAnytimeValid);
    CHECK_THROWS_AS(RobustTest(CriterionKind::BIC, 0.05), NotAnytimeValid);
    CHECK_THROWS_AS(RobustTest(CriterionKind::HannanQuinn, 0.05), NotAnytimeValid);

    // alpha = 0 never rejects, even on overwhelming evidence
    RobustTest zero(CriterionKind::Switch, 0.0);
    Decision strong;
    strong.evidence = 1e-300;
    strong.log_evidence = -700.0;
    CHECK(!zero.observe(strong));

    // monotone in alpha and absorbing
    CounterRng rng(8, 8);
    RobustTest lo(CriterionKind::Switch, 0.05), hi(CriterionKind::Switch, 0.2);
    SwitchState s = gauss_switch_state();
    bool lo_rej = false, hi_rej = false;
    for (int i = 0; i < 400; ++i) {
        s.update(rng.next_normal(0.8, 1.0));
        Decision d = switch_select(s);
        lo_rej = lo.observe(d);
        hi_rej = hi.observe(d);
        if (lo_rej) CHECK(hi_rej);
    }
    CHECK(lo_rej);
    CHECK(hi_rej);
    // absorbing: a huge-evidence decision after rejection does not reset it
    Decision weak;
    weak.evidence = 100.0;
    weak.log_evidence = std::log(100.0);
    CHECK(lo.observe(weak));
}

TEST_CASE("post-selection estimate") {
    NestedPair mv(gaussian_mean_variance(), 1, {0.0});
    EstimatorSpec mle_est;  // defaults to MLE
    Decision pick0;
    pick0.selected = 0;
    std::vector<double> xs = {0.4, -1.0, 2.0, 1.0};
    MeanParam e0 = post_selection_estimate(pick0, xs, mv, mle_est, mle_est);
    CHECK(e0.values[1] == 0.0);  // tail pinned
    CHECK(e0.values[0] == doctest::Approx(suff_mean(xs, mv.family)[0]).epsilon(1e-14));

    Decision pick1;
    pick1.selected = 1;
    MeanParam e1 = post_selection_estimate(pick1, xs, mv, mle_est, mle_est);
    CHECK(e1.values == mle(xs, mv.family).values);

    // estimator errors pass through
    NestedPair bp(bernoulli_family(), 0, {0.5});
    std::vector<double> ones = {1, 1, 1};
    CHECK_THROWS_AS(post_selection_estimate(pick1, ones, bp, mle_est, mle_est), UndefinedMLE);

    // MAP fallback is available for the same sample
    EstimatorSpec map_est = estimator_by_name("map", bp.family);
    MeanParam m = post_selection_estimate(pick1, ones, bp, map_est, map_est);
    CHECK(m.inside);
}

TEST_CASE("penalized criteria depend on the sample only through densities") {
    // A rescaled parameterization of the same Gaussian location densities:
    // statistic 2x, mean parameter 2 mu, Fisher information 1/4.
    FamilySpec f2;
    f2.name = "gaussian_location_scaled";
    f2.dim = 1;
    f2.suff_stat = [](double x) { return Vec{2.0 * x}; };
    f2.log_carrier = [](double x) { return -0.5 * kLog2Pi - 0.5 * x * x; };
    f2.log_partition = [](const Vec& th) { return 2.0 * th[0] * th[0]; };
    f2.mean_map = [](const Vec& th) { return Vec{4.0 * th[0]}; };
    f2.nat_map = [](const Vec& mu) { return Vec{mu[0] / 4.0}; };
    f2.fisher_info = [](const Vec&) {
        SmallMatrix m;
        m.dim = 1;
        m.a[0] = 0.25;
        return m;
    };
    f2.mean_space = {Interval{-1e308, 1e308}};
    f2.in_support = [](double) { return true; };
    f2.kl = [](const Vec& r, const Vec& e) { return (r[0] - e[0]) * (r[0] - e[0]) / 8.0; };
    f2.renyi_half = [](const Vec& r, const Vec& e) { return (r[0] - e[0]) * (r[0] - e[0]) / 16.0; };

    NestedPair base = gauss_pair();
    NestedPair scaled(f2, 0, {0.0});
    CounterRng rng(17, 2);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 3 + static_cast<int>(rng.next_unit() * 40);
        std::vector<double> xs;
        for (int i = 0; i < n; ++i) xs.push_back(rng.next_normal(0.3, 1.0));
        CHECK(aic_select(xs, base, 1.0).evidence ==
              doctest::Approx(aic_select(xs, scaled, 1.0).evidence).epsilon(1e-11));
        CHECK(bic_select(xs, base).evidence ==
              doctest::Approx(bic_select(xs, scaled).evidence).epsilon(1e-11));
        CHECK(hq_select(xs, base, 1.2).evidence ==
              doctest::Approx(hq_select(xs, scaled, 1.2).evidence).epsilon(1e-11));
    }
}
