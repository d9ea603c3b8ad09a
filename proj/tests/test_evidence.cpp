#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "switchsel/evidence.hpp"
#include "switchsel/rng.hpp"
#include "switchsel/stats.hpp"

using namespace switchsel;

namespace {

NumericPrior uniform01_prior(int nodes = 129) {
    NumericPrior p;
    p.density = [](const Vec&) { return 1.0; };
    p.box = {Interval{1e-9, 1.0 - 1e-9}};
    p.nodes_per_dim = nodes;
    return p;
}

NumericPrior normal_prior_1d(double m, double v, double lo, double hi, int nodes = 129) {
    NumericPrior p;
    p.density = [m, v](const Vec& mu) {
        double d = mu[0] - m;
        return std::exp(-0.5 * d * d / v) / std::sqrt(2.0 * M_PI * v);
    };
    p.box = {Interval{lo, hi}};
    p.nodes_per_dim = nodes;
    return p;
}

}  // namespace

TEST_CASE("beta-bernoulli marginal and predictives") {
    MarginalState s = MarginalState::beta_bernoulli(1, 1);
    CHECK(s.log_marginal() == 0.0);  // empty product

    CHECK(s.log_predictive(1) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    s.update(1);
    CHECK(s.log_predictive(1) ==
          doctest::Approx(std::log(oracle::beta_bernoulli_predictive_one(1, 1, 1, 1))).epsilon(1e-14));
    s.update(0);
    s.update(1);
    // quadrature oracle: int_0^1 mu^2 (1-mu) dmu = 1/12
    CHECK(s.log_marginal() == doctest::Approx(std::log(1.0 / 12.0)).epsilon(1e-12));
    CHECK(s.log_marginal() ==
          doctest::Approx(oracle::log_beta_bernoulli_marginal_quad(1, 1, 2, 3)).epsilon(1e-9));
    CHECK_THROWS_AS(s.log_predictive(0.5), InvalidObservation);
}

TEST_CASE("gaussian predictive at n = 0") {
    MarginalState s = MarginalState::normal_mean(1.0, 0.0, 1.0);
    s.update(0.0);
    // predictive is Normal(0, 2); log density at 0 is -log sqrt(4 pi)
    CHECK(s.log_marginal() == doctest::Approx(-0.5 * std::log(4.0 * M_PI)).epsilon(1e-14));
    CHECK(s.log_marginal() ==
          doctest::Approx(oracle::gaussian_location_log_marginal({0.0}, 0, 1, 1)).epsilon(1e-14));
}

TEST_CASE("gamma-poisson predictive at n = 0") {
    MarginalState s = MarginalState::gamma_poisson(1, 1);
    CHECK(s.log_predictive(0) ==
          doctest::Approx(std::log(oracle::gamma_poisson_prior_predictive(1, 1, 0))).epsilon(1e-14));
    CHECK(s.log_predictive(0) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK_THROWS_AS(s.log_predictive(2.5), InvalidObservation);
    CHECK_THROWS_AS(s.log_predictive(-1.0), InvalidObservation);
}

TEST_CASE("chain rule and split consistency are exact") {
    CounterRng rng(7, 0);
    MarginalState s = MarginalState::normal_mean(1.0, 0.0, 1.0);
    double acc = 0.0;
    std::vector<double> xs;
    for (int i = 0; i < 10000; ++i) {
        double x = rng.next_normal(0.3, 1.0);
        xs.push_back(x);
        acc += s.log_predictive(x);
        s.update(x);
    }
    CHECK(std::abs(acc - s.log_marginal()) <= 1e-12);

    // prefix split: log pB(x^n) = log pB(x^{t-1}) + log pB(x_t..x_n | x^{t-1})
    for (int t : {1, 17, 5000}) {
        MarginalState a = MarginalState::normal_mean(1.0, 0.0, 1.0);
        for (int i = 0; i < t - 1; ++i) a.update(xs[static_cast<std::size_t>(i)]);
        double prefix = a.log_marginal();
        for (std::size_t i = static_cast<std::size_t>(t - 1); i < xs.size(); ++i) a.update(xs[i]);
        CHECK(a.log_marginal() == doctest::Approx(s.log_marginal()).epsilon(1e-15));
        CHECK(prefix + (s.log_marginal() - prefix) == s.log_marginal());
    }
}

TEST_CASE("conjugate marginals are exchangeable") {
    std::vector<double> xs = {1, 0, 0, 1, 1, 1, 0, 1};
    std::vector<double> perm = {1, 1, 1, 1, 1, 0, 0, 0};
    MarginalState a = MarginalState::beta_bernoulli(2, 3), b = MarginalState::beta_bernoulli(2, 3);
    for (double x : xs) a.update(x);
    for (double x : perm) b.update(x);
    CHECK(a.log_marginal() == doctest::Approx(b.log_marginal()).epsilon(1e-14));

    MarginalState c = MarginalState::normal_inverse_gamma(0.3, 2.0, 1.5, 0.7);
    MarginalState d = MarginalState::normal_inverse_gamma(0.3, 2.0, 1.5, 0.7);
    std::vector<double> ys = {0.4, -1.2, 2.2, 0.0, 0.9};
    std::vector<double> ysr(ys.rbegin(), ys.rend());
    for (double x : ys) c.update(x);
    for (double x : ysr) d.update(x);
    CHECK(c.log_marginal() == doctest::Approx(d.log_marginal()).epsilon(1e-12));
}

TEST_CASE("increments are bounded by the sup of the predictive density") {
    CounterRng rng(11, 4);
    MarginalState b = MarginalState::beta_bernoulli(1, 1);
    MarginalState g = MarginalState::normal_mean(1.0, 0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        double xb = rng.next_bernoulli(0.4) ? 1.0 : 0.0;
        CHECK(b.log_predictive(xb) <= 0.0);
        b.update(xb);
        double xg = rng.next_normal(0, 1);
        CHECK(g.log_predictive(xg) <= -0.5 * std::log(2.0 * M_PI));  // predictive variance >= 1
        g.update(xg);
    }
}

TEST_CASE("discrete mixture mass sums to one") {
    // Sum over all Bernoulli strings of length 10 of exp(log_marginal).
    const int n = 10;
    double total = 0.0;
    for (int bits = 0; bits < (1 << n); ++bits) {
        MarginalState s = MarginalState::beta_bernoulli(1, 1);
        for (int i = 0; i < n; ++i) s.update((bits >> i) & 1 ? 1.0 : 0.0);
        total += std::exp(s.log_marginal());
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("closed forms agree with the exact formulas") {
    std::vector<double> xs = {0.2, -0.5, 1.7, 0.1, 0.0, -2.2, 0.4};
    MarginalState g = MarginalState::normal_mean(1.0, 0.25, 2.0);
    for (double x : xs) g.update(x);
    CHECK(g.log_marginal() ==
          doctest::Approx(oracle::gaussian_location_log_marginal(xs, 0.25, 2.0, 1.0)).epsilon(1e-12));

    MarginalState p = MarginalState::gamma_poisson(1.5, 0.8);
    std::vector<double> ks = {0, 3, 1, 2, 0, 5};
    for (double k : ks) p.update(k);
    CHECK(p.log_marginal() ==
          doctest::Approx(oracle::log_gamma_poisson_marginal_exact(1.5, 0.8, ks)).epsilon(1e-12));

    MarginalState nig = MarginalState::normal_inverse_gamma(0.4, 2.0, 1.5, 0.9);
    for (double x : xs) nig.update(x);
    CHECK(nig.log_marginal() ==
          doctest::Approx(oracle::log_nig_marginal_exact(0.4, 2.0, 1.5, 0.9, xs)).epsilon(1e-11));

    // gamma-precision marginal equals NIG in the kappa -> infinity pinned-mean
    // limit; cross-check against direct 1-D quadrature over the variance chart.
    MarginalState gp = MarginalState::gamma_precision(2.0, 1.5, 0.0);
    std::vector<double> zs = {0.3, -0.8, 1.1, 0.2};
    for (double x : zs) gp.update(x);
    double quad = oracle::simpson(
        [&](double lam) {
            if (lam <= 0) return 0.0;
            double logprior = 2.0 * std::log(1.5) - std::lgamma(2.0) + std::log(lam) - 1.5 * lam;
            double loglik = 0.0;
            for (double x : zs) loglik += 0.5 * std::log(lam / (2.0 * M_PI)) - 0.5 * lam * x * x;
            return std::exp(logprior + loglik);
        },
        1e-8, 60.0, 1 << 15);
    CHECK(gp.log_marginal() == doctest::Approx(std::log(quad)).epsilon(1e-8));
}

TEST_CASE("numeric marginal matches conjugate closed forms") {
    std::vector<double> xs = {1, 0, 1};
    MarginalState numeric = MarginalState::numeric(bernoulli_family(), uniform01_prior(32769));
    MarginalState conj = MarginalState::beta_bernoulli(1, 1);
    for (double x : xs) {
        CHECK(numeric.log_predictive(x) == doctest::Approx(conj.log_predictive(x)).epsilon(1e-6));
        numeric.update(x);
        conj.update(x);
    }
    CHECK(numeric.log_marginal() == doctest::Approx(conj.log_marginal()).epsilon(1e-8));
    CHECK(MarginalState::numeric(bernoulli_family(), uniform01_prior()).log_marginal() == 0.0);
}

TEST_CASE("adaptive quadrature oracle") {
    auto fam = gaussian_location();
    std::vector<double> xs;
    CounterRng rng(3, 9);
    for (int i = 0; i < 60; ++i) xs.push_back(rng.next_normal(0.7, 1.0));
    NumericPrior prior = normal_prior_1d(0.0, 1.0, -8.0, 8.0);
    double q = quadrature_log_marginal(fam, prior, xs, 1e-8);
    CHECK(q == doctest::Approx(oracle::gaussian_location_log_marginal(xs, 0, 1, 1)).epsilon(1e-7));

    // n = 0: log marginal is 0 for any proper prior
    CHECK(quadrature_log_marginal(fam, prior, {}, 1e-8) == doctest::Approx(0.0).epsilon(1e-9));

    // symmetry: +-a under a symmetric prior give equal marginals
    double qa = quadrature_log_marginal(fam, prior, {1.3}, 1e-9);
    double qb = quadrature_log_marginal(fam, prior, {-1.3}, 1e-9);
    CHECK(qa == doctest::Approx(qb).epsilon(1e-9));

    // two chart dimensions cap at 181 nodes per axis; a posterior much
    // narrower than the reachable spacing exhausts the refinement budget
    std::vector<double> big;
    for (int i = 0; i < 2000; ++i) big.push_back(rng.next_normal(1.3, 1.0));
    NumericPrior nig;
    nig.density = [](const Vec& v) {
        double m = v[0], s2 = v[1];
        double inv_gamma = std::exp(-std::log(s2) * 2.0 - 1.0 / s2);  // a = b = 1
        double normal = std::exp(-0.5 * m * m / s2) / std::sqrt(2.0 * M_PI * s2);
        return inv_gamma * normal;
    };
    nig.box = {Interval{-4.0, 4.0}, Interval{0.1, 8.0}};
    nig.to_mean = [](const Vec& v) { return Vec{v[0] * v[0] + v[1], v[0]}; };
    CHECK_THROWS_AS(quadrature_log_marginal(gaussian_mean_variance(), nig, big, 1e-6), GridTooCoarse);
}

TEST_CASE("numeric prior mass check") {
    CHECK(numeric_prior_mass(normal_prior_1d(0, 1, -10, 10)) == doctest::Approx(1.0).epsilon(1e-8));
    NumericPrior broken = normal_prior_1d(0, 1, -10, 10);
    auto base = broken.density;
    broken.density = [base](const Vec& v) { return 1.7 * base(v); };
    CHECK(std::abs(numeric_prior_mass(broken) - 1.0) > 0.5);
}

TEST_CASE("laplace diagnostic stabilizes") {
    auto fam = gaussian_location();
    CounterRng rng(5, 2);
    std::vector<double> xs;
    MarginalState s = MarginalState::normal_mean(1.0, 0.0, 1.0);
    std::vector<int> checkpoints = {100, 1000, 10000};
    std::vector<double> diag;
    for (int n = 1; n <= 10000; ++n) {
        double x = rng.next_normal(0.0, 1.0);
        xs.push_back(x);
        s.update(x);
        if (std::find(checkpoints.begin(), checkpoints.end(), n) != checkpoints.end())
            diag.push_back(laplace_diagnostic(s, fam, xs));
    }
    double mu_hat = 0.0;
    for (double x : xs) mu_hat += x;
    mu_hat /= static_cast<double>(xs.size());
    // target: log(sqrt(det I) / omega(mu_hat)) with I = 1, omega = N(0,1) pdf
    double target = -(-0.5 * std::log(2.0 * M_PI) - 0.5 * mu_hat * mu_hat);
    CHECK(std::abs(diag[2] - target) < 0.05);
    CHECK(std::abs(diag[2] - diag[1]) < std::abs(diag[1] - diag[0]));

    // Beta(1,1)-Bernoulli at mu_hat = 1/2: the limit is log 2
    const int n = 5000;
    MarginalState bb = MarginalState::beta_bernoulli(1, 1);
    std::vector<double> ys;
    for (int i = 0; i < n; ++i) {
        double y = (i % 2 == 0) ? 1.0 : 0.0;
        ys.push_back(y);
        bb.update(y);
    }
    CHECK(laplace_diagnostic(bb, bernoulli_family(), ys) == doctest::Approx(std::log(2.0)).epsilon(0.02));

    // UndefinedMLE passes through
    MarginalState bb2 = MarginalState::beta_bernoulli(1, 1);
    bb2.update(1.0);
    std::vector<double> ones = {1.0};
    CHECK_THROWS_AS(laplace_diagnostic(bb2, bernoulli_family(), ones), UndefinedMLE);
}
