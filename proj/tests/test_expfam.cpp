#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "switchsel/expfam.hpp"
#include "switchsel/rng.hpp"

using namespace switchsel;

namespace {

std::vector<double> grid_points(double lo, double hi, int k = 17) {
    std::vector<double> g;
    for (int i = 0; i < k; ++i) g.push_back(lo + (hi - lo) * i / (k - 1));
    return g;
}

// Central compact testing boxes per family, strictly interior to the mean
// space (the uniformity claims below hold on any such box).
std::vector<std::vector<double>> family_grid(const FamilySpec& fam) {
    std::vector<std::vector<double>> pts;
    if (fam.name == "bernoulli") {
        for (double m : grid_points(0.2, 0.8)) pts.push_back({m});
    } else if (fam.name == "poisson") {
        for (double m : grid_points(0.1, 10.0)) pts.push_back({m});
    } else if (fam.name == "gaussian_location") {
        for (double m : grid_points(-3.0, 3.0)) pts.push_back({m});
    } else {
        for (double m1 : grid_points(1.5, 10.0, 9))
            for (double m2 : grid_points(-1.0, 1.0, 9)) pts.push_back({m1, m2});
    }
    return pts;
}

}  // namespace

TEST_CASE("sufficient mean") {
    CHECK(suff_mean({1, 2, 3}, gaussian_location())[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(suff_mean({1, 0, 1}, bernoulli_family())[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(suff_mean({0, 4}, poisson_family())[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(suff_mean({}, bernoulli_family()), EmptySample);
}

TEST_CASE("mle") {
    auto g = gaussian_location();
    MeanParam m = mle({1, 2, 3}, g);
    CHECK(m.values[0] == doctest::Approx(2.0));
    CHECK(m.inside);

    CHECK_THROWS_AS(mle({1, 1, 1}, bernoulli_family()), UndefinedMLE);

    auto mv = gaussian_mean_variance();
    MeanParam w = mle({0, 2}, mv);
    CHECK(w.values[0] == doctest::Approx(2.0));
    CHECK(w.values[1] == doctest::Approx(1.0));
    CHECK(w.inside);
    // zero sample variance sits on the curved boundary
    CHECK_THROWS_AS(mle({1, 1, 1}, mv), UndefinedMLE);
}

TEST_CASE("project0") {
    NestedPair mv(gaussian_mean_variance(), 1, {0.0});
    MeanParam mu1 = mv.family.mean_param({1.5, 0.7});
    MeanParam p = project0(mu1, mv);
    CHECK(p.values[0] == 1.5);
    CHECK(p.values[1] == 0.0);
    CHECK(p.inside);

    NestedPair toy(bernoulli_family(), 0, {0.5});
    for (double m : {0.1, 0.4, 0.9}) {
        MeanParam q = project0(toy.family.mean_param({m}), toy);
        CHECK(q.values[0] == 0.5);
    }

    // idempotence
    MeanParam pp = project0(p, mv);
    CHECK(pp.values == p.values);
}

TEST_CASE("project0 is the KL argmin over M0") {
    // Zero-mean Gaussians: argmin_s D(N(m,v) || N(0,s)) should equal v + m^2,
    // which is exactly the first mean coordinate that project0 copies.
    NestedPair mv(gaussian_mean_variance(), 1, {0.0});
    MeanParam mu1 = mv.family.mean_param({2.3, 0.8});
    double best = 1e300, best_s = 0.0;
    for (double s = 0.05; s <= 8.0; s += 0.001) {
        double d = loss(LossKind::KL, mu1, mv.family.mean_param({s, 0.0}), mv.family);
        if (d < best) {
            best = d;
            best_s = s;
        }
    }
    MeanParam p = project0(mu1, mv);
    CHECK(best_s == doctest::Approx(p.values[0]).epsilon(1e-3));

    // singleton M0: the grid is one point and the projection is that point
    NestedPair toy(bernoulli_family(), 0, {0.35});
    CHECK(project0(toy.family.mean_param({0.8}), toy).values[0] == 0.35);
}

TEST_CASE("map estimate") {
    auto b = bernoulli_family();
    MeanParam anchor = b.mean_param({0.5});
    CHECK(map_estimate({1, 1}, b, 1.0, anchor).values[0] == doctest::Approx(2.5 / 3.0).epsilon(1e-15));
    CHECK(map_estimate({}, b, 1.0, anchor).values[0] == doctest::Approx(0.5).epsilon(1e-15));
    MeanParam m = map_estimate({1, 1, 1}, b, 1.0, anchor);
    CHECK(m.values[0] == doctest::Approx(0.875).epsilon(1e-15));
    CHECK(m.inside);  // strictly inside where the MLE fails

    // MAP of the curved family stays strictly inside as well
    auto mv = gaussian_mean_variance();
    MeanParam a2 = mv.mean_param({2.0, 0.0});
    MeanParam w = map_estimate({5.0, 5.0, 5.0}, mv, 1.0, a2);
    CHECK(w.inside);
}

TEST_CASE("truncated mle") {
    auto b = bernoulli_family();
    auto sched = default_box_schedule(b);
    CHECK(truncated_mle({1, 1, 1}, b, sched).values[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(truncated_mle({1, 0, 1}, b, sched).values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    for (std::int64_t n : {1, 5, 50, 500}) {
        auto box = sched(n);
        CHECK(box[0].lo <= 1.0 / (n + 1) + 1e-15);
        CHECK(1.0 - box[0].hi <= 1.0 / (n + 1) + 1e-15);
        CHECK(box[0].lo > 0.0);
        CHECK(box[0].hi < 1.0);
    }
    CHECK_THROWS_AS(default_box_schedule(gaussian_mean_variance()), ConfigError);
}

TEST_CASE("loss examples with quadrature oracles") {
    auto g = gaussian_location();
    MeanParam a = g.mean_param({0.0}), b = g.mean_param({1.0});
    CHECK(loss(LossKind::KL, a, b, g) == doctest::Approx(0.5).epsilon(1e-12));
    double kl_quad = oracle::kl_continuous([&](double x) { return oracle::density_at(g, {0.0}, x); },
                                           [&](double x) { return oracle::density_at(g, {1.0}, x); }, -12, 13);
    CHECK(loss(LossKind::KL, a, b, g) == doctest::Approx(kl_quad).epsilon(1e-8));

    auto bn = bernoulli_family();
    MeanParam h = bn.mean_param({0.5}), q = bn.mean_param({0.25});
    double kl_sum = oracle::kl_discrete([&](double x) { return oracle::density_at(bn, {0.5}, x); },
                                        [&](double x) { return oracle::density_at(bn, {0.25}, x); }, {0, 1});
    CHECK(loss(LossKind::KL, h, q, bn) == doctest::Approx(kl_sum).epsilon(1e-12));
    CHECK(loss(LossKind::KL, h, q, bn) == doctest::Approx(0.14384103622589045).epsilon(1e-12));

    CHECK(loss(LossKind::SquaredHellinger, a, a, g) == 0.0);
    CHECK(loss(LossKind::Renyi, a, a, g) == 0.0);

    // identity Fisher information: standardized == squared
    CHECK(loss(LossKind::StandardizedSquared, a, b, g) == loss(LossKind::SquaredError, a, b, g));

    CHECK_THROWS_AS(loss(LossKind::KL, h, bn.mean_param({1.0}), bn), NonFiniteLoss);
}

TEST_CASE("hellinger and renyi match quadrature references") {
    auto g = gaussian_location();
    auto p = gaussian_mean_variance();
    struct Pair {
        const FamilySpec* fam;
        Vec r, e;
    };
    std::vector<Pair> pairs = {{&g, {0.3}, {-1.1}}, {&p, {2.0, 0.3}, {3.5, -0.4}}};
    for (auto& pr : pairs) {
        double bc = oracle::bhattacharyya_continuous(
            [&](double x) { return oracle::density_at(*pr.fam, pr.r, x); },
            [&](double x) { return oracle::density_at(*pr.fam, pr.e, x); }, -20, 20);
        MeanParam mr = pr.fam->mean_param(pr.r), me = pr.fam->mean_param(pr.e);
        CHECK(loss(LossKind::Renyi, mr, me, *pr.fam) == doctest::Approx(-2.0 * std::log(bc)).epsilon(1e-7));
        CHECK(loss(LossKind::SquaredHellinger, mr, me, *pr.fam) ==
              doctest::Approx(2.0 * (1.0 - bc)).epsilon(1e-7));
    }
    auto bn = bernoulli_family();
    double bc = oracle::bhattacharyya_discrete([&](double x) { return oracle::density_at(bn, {0.3}, x); },
                                               [&](double x) { return oracle::density_at(bn, {0.7}, x); },
                                               {0, 1});
    CHECK(loss(LossKind::Renyi, bn.mean_param({0.3}), bn.mean_param({0.7}), bn) ==
          doctest::Approx(-2.0 * std::log(bc)).epsilon(1e-12));

    auto po = poisson_family();
    double bcp = oracle::bhattacharyya_discrete([&](double x) { return oracle::density_at(po, {2.5}, x); },
                                                [&](double x) { return oracle::density_at(po, {6.0}, x); },
                                                oracle::poisson_support(6.0));
    CHECK(loss(LossKind::Renyi, po.mean_param({2.5}), po.mean_param({6.0}), po) ==
          doctest::Approx(-2.0 * std::log(bcp)).epsilon(1e-10));
}

TEST_CASE("family structure checks on the grid") {
    for (const FamilySpec& fam : {gaussian_location(), bernoulli_family(), poisson_family(),
                                  gaussian_mean_variance()}) {
        auto pts = family_grid(fam);
        for (const auto& mu : pts) {
            CHECK(fam.strictly_inside(mu));
            CHECK(fam.fisher_info(mu).spd());
            Vec round = fam.mean_map(fam.nat_map(mu));
            for (int j = 0; j < fam.dim; ++j)
                CHECK(round[static_cast<std::size_t>(j)] ==
                      doctest::Approx(mu[static_cast<std::size_t>(j)]).epsilon(1e-10));
        }
        // density normalization at a few interior points
        for (std::size_t k : {std::size_t{0}, pts.size() / 2, pts.size() - 1}) {
            const auto& mu = pts[k];
            double mass;
            if (fam.name == "bernoulli") {
                mass = oracle::density_at(fam, mu, 0) + oracle::density_at(fam, mu, 1);
            } else if (fam.name == "poisson") {
                mass = 0.0;
                for (double x : oracle::poisson_support(10.0)) mass += oracle::density_at(fam, mu, x);
            } else {
                double center = fam.dim == 2 ? mu[1] : mu[0];
                double sd = fam.dim == 2 ? std::sqrt(mu[0] - mu[1] * mu[1]) : 1.0;
                mass = oracle::simpson([&](double x) { return oracle::density_at(fam, mu, x); },
                                       center - 14 * sd, center + 14 * sd, 1 << 14);
            }
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("loss sandwich on the grid") {
    for (const FamilySpec& fam : {gaussian_location(), bernoulli_family(), poisson_family(),
                                  gaussian_mean_variance()}) {
        CAPTURE(fam.name);
        auto pts = family_grid(fam);
        double min_h2_over_st = 1e300, max_kl_over_sq = 0.0, min_st_over_sq = 1e300;
        double max_rh_dev = 0.0;
        for (const auto& r : pts) {
            for (const auto& e : pts) {
                MeanParam mr = fam.mean_param(r), me = fam.mean_param(e);
                double dsq = loss(LossKind::SquaredError, mr, me, fam);
                if (dsq == 0.0) continue;
                double dst = loss(LossKind::StandardizedSquared, mr, me, fam);
                double dr = loss(LossKind::Renyi, mr, me, fam);
                double dh = loss(LossKind::SquaredHellinger, mr, me, fam);
                double dkl = loss(LossKind::KL, mr, me, fam);
                // pointwise ordering, exact up to rounding
                CHECK(dh <= dr + 1e-10);
                CHECK(dr <= dkl + 1e-10);
                // eq rh identity holds by construction; verify anyway
                max_rh_dev = std::max(max_rh_dev, std::abs(dh - 2.0 * (1.0 - std::exp(-dr / 2.0))));
                min_h2_over_st = std::min(min_h2_over_st, dh / dst);
                max_kl_over_sq = std::max(max_kl_over_sq, dkl / dsq);
                min_st_over_sq = std::min(min_st_over_sq, dst / dsq);
            }
        }
        // finite positive constants exist on the box
        CHECK(min_h2_over_st > 0.0);
        CHECK(std::isfinite(max_kl_over_sq));
        CHECK(max_kl_over_sq > 0.0);
        CHECK(min_st_over_sq > 0.0);
        CHECK(max_rh_dev <= 1e-12);
    }
}

TEST_CASE("mle unbiasedness and sufficient-efficiency (Monte Carlo)") {
    auto g = gaussian_location();
    const double mu_true = 0.3;
    const int n = 16;
    const std::int64_t reps = 100000;
    CounterRng rng(12345, 1);
    double sum_mu = 0.0, sum_loss = 0.0, sum_loss_sq = 0.0;
    for (std::int64_t r = 0; r < reps; ++r) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += rng.next_normal(mu_true, 1.0);
        double mu_hat = s / n;
        sum_mu += mu_hat;
        double l = (mu_hat - mu_true) * (mu_hat - mu_true);
        sum_loss += l;
        sum_loss_sq += l * l;
    }
    double mean_mu = sum_mu / reps;
    double se_mu = 1.0 / std::sqrt(static_cast<double>(n) * reps);
    CHECK(std::abs(mean_mu - mu_true) <= 4.0 * se_mu);

    // E||mu_hat - mu||^2 = 1/n exactly for the location family
    double mean_loss = sum_loss / reps;
    double var_loss = sum_loss_sq / reps - mean_loss * mean_loss;
    double se_loss = std::sqrt(var_loss / reps);
    CHECK(std::abs(mean_loss - 1.0 / n) <= 4.0 * se_loss);
}
