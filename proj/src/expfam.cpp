#include "switchsel/expfam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "switchsel/stats.hpp"

namespace switchsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq(double x) { return x * x; }

bool is_nonneg_integer(double x) {
    return x >= 0.0 && x == std::floor(x) && x < 9.0e15;
}

// Bhattacharyya-based Renyi divergence of order 1/2 between two Gaussians.
double gaussian_renyi_half(double m_ref, double v_ref, double m_est, double v_est) {
    return std::log((v_ref + v_est) / (2.0 * std::sqrt(v_ref * v_est))) +
           0.5 * sq(m_ref - m_est) / (v_ref + v_est);
}

double gaussian_kl(double m_ref, double v_ref, double m_est, double v_est) {
    return 0.5 * (std::log(v_est / v_ref) + (v_ref + sq(m_ref - m_est)) / v_est - 1.0);
}

}  // namespace

FamilySpec gaussian_location(double sigma) {
    const double s2 = sigma * sigma;
    FamilySpec f;
    f.name = "gaussian_location";
    f.dim = 1;
    f.suff_stat = [](double x) { return Vec{x}; };
    // Carrier is the N(0, sigma^2) density, so psi(0) = 0.
    f.log_carrier = [s2](double x) { return -0.5 * (kLog2Pi + std::log(s2)) - 0.5 * x * x / s2; };
    f.log_partition = [s2](const Vec& th) { return 0.5 * th[0] * th[0] * s2; };
    f.mean_map = [s2](const Vec& th) { return Vec{th[0] * s2}; };
    f.nat_map = [s2](const Vec& mu) { return Vec{mu[0] / s2}; };
    f.fisher_info = [s2](const Vec&) {
        SmallMatrix m;
        m.dim = 1;
        m.a[0] = 1.0 / s2;
        return m;
    };
    f.mean_space = {Interval{-kInf, kInf}};
    f.in_support = [](double x) { return std::isfinite(x); };
    f.kl = [s2](const Vec& r, const Vec& e) { return 0.5 * sq(r[0] - e[0]) / s2; };
    f.renyi_half = [s2](const Vec& r, const Vec& e) { return 0.25 * sq(r[0] - e[0]) / s2; };
    return f;
}

FamilySpec bernoulli_family() {
    FamilySpec f;
    f.name = "bernoulli";
    f.dim = 1;
    f.suff_stat = [](double x) { return Vec{x}; };
    f.log_carrier = [](double) { return 0.0; };
    f.log_partition = [](const Vec& th) { return std::log1p(std::exp(th[0])); };
    f.mean_map = [](const Vec& th) { return Vec{1.0 / (1.0 + std::exp(-th[0]))}; };
    f.nat_map = [](const Vec& mu) { return Vec{std::log(mu[0] / (1.0 - mu[0]))}; };
    f.fisher_info = [](const Vec& mu) {
        SmallMatrix m;
        m.dim = 1;
        m.a[0] = 1.0 / (mu[0] * (1.0 - mu[0]));
        return m;
    };
    f.mean_space = {Interval{0.0, 1.0}};
    f.in_support = [](double x) { return x == 0.0 || x == 1.0; };
    f.kl = [](const Vec& r, const Vec& e) {
        double p = r[0], q = e[0];
        double v = 0.0;
        if (p > 0.0) v += p * std::log(p / q);
        if (p < 1.0) v += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
        return v;
    };
    f.renyi_half = [](const Vec& r, const Vec& e) {
        double bc = std::sqrt(r[0] * e[0]) + std::sqrt((1.0 - r[0]) * (1.0 - e[0]));
        return -2.0 * std::log(bc);
    };
    return f;
}

FamilySpec poisson_family() {
    FamilySpec f;
    f.name = "poisson";
    f.dim = 1;
    f.suff_stat = [](double x) { return Vec{x}; };
    f.log_carrier = [](double x) { return -std::lgamma(x + 1.0); };
    f.log_partition = [](const Vec& th) { return std::exp(th[0]); };
    f.mean_map = [](const Vec& th) { return Vec{std::exp(th[0])}; };
    f.nat_map = [](const Vec& mu) { return Vec{std::log(mu[0])}; };
    f.fisher_info = [](const Vec& mu) {
        SmallMatrix m;
        m.dim = 1;
        m.a[0] = 1.0 / mu[0];
        return m;
    };
    f.mean_space = {Interval{0.0, kInf}};
    f.in_support = &is_nonneg_integer;
    f.kl = [](const Vec& r, const Vec& e) {
        return r[0] * std::log(r[0] / e[0]) + e[0] - r[0];
    };
    f.renyi_half = [](const Vec& r, const Vec& e) { return sq(std::sqrt(r[0]) - std::sqrt(e[0])); };
    return f;
}

FamilySpec gaussian_mean_variance() {
    FamilySpec f;
    f.name = "gaussian_meanvar";
    f.dim = 2;
    f.suff_stat = [](double x) { return Vec{x * x, x}; };
    f.log_carrier = [](double) { return 0.0; };
    // theta = (-1/(2 s2), m/s2), psi = m^2/(2 s2) + log(2 pi s2)/2.
    f.log_partition = [](const Vec& th) {
        double s2 = -0.5 / th[0];
        double m = th[1] * s2;
        return 0.5 * m * m / s2 + 0.5 * (kLog2Pi + std::log(s2));
    };
    f.mean_map = [](const Vec& th) {
        double s2 = -0.5 / th[0];
        double m = th[1] * s2;
        return Vec{m * m + s2, m};
    };
    f.nat_map = [](const Vec& mu) {
        double s2 = mu[0] - mu[1] * mu[1];
        return Vec{-0.5 / s2, mu[1] / s2};
    };
    f.fisher_info = [](const Vec& mu) {
        double m = mu[1];
        double s2 = mu[0] - m * m;
        double s4 = s2 * s2;
        SmallMatrix out;
        out.dim = 2;
        out.a = {0.5 / s4, -m / s4, -m / s4, 2.0 * m * m / s4 + 1.0 / s2};
        return out;
    };
    f.mean_space = {Interval{0.0, kInf}, Interval{-kInf, kInf}};
    f.mean_constraint = [](const Vec& mu) { return mu[0] > mu[1] * mu[1]; };
    f.in_support = [](double x) { return std::isfinite(x); };
    f.kl = [](const Vec& r, const Vec& e) {
        return gaussian_kl(r[1], r[0] - sq(r[1]), e[1], e[0] - sq(e[1]));
    };
    f.renyi_half = [](const Vec& r, const Vec& e) {
        return gaussian_renyi_half(r[1], r[0] - sq(r[1]), e[1], e[0] - sq(e[1]));
    };
    return f;
}

FamilySpec family_by_name(const std::string& name, double sigma) {
    if (name == "gaussian_location") return gaussian_location(sigma);
    if (name == "bernoulli") return bernoulli_family();
    if (name == "poisson") return poisson_family();
    if (name == "gaussian_meanvar") return gaussian_mean_variance();
    throw ConfigError("unknown family '" + name + "'");
}

NestedPair::NestedPair(FamilySpec fam, int m0_, Vec tail) : family(std::move(fam)), m0(m0_), fixed_tail(std::move(tail)) {
    if (m0 < 0 || m0 >= family.dim) throw ConfigError("need 0 <= m0 < m1");
    if (static_cast<int>(fixed_tail.size()) != family.dim - m0)
        throw ConfigError("fixed tail must have m1 - m0 components");
    for (int j = m0; j < family.dim; ++j) {
        if (!family.mean_space[static_cast<std::size_t>(j)].contains_strictly(fixed_tail[static_cast<std::size_t>(j - m0)]))
            throw ConfigError("pinned tail component outside the open mean interval");
    }
    if (m0 == 0 && !family.strictly_inside(fixed_tail))
        throw ConfigError("pinned point violates the family's mean constraint");
}

MeanParam NestedPair::null_point() const {
    if (m0 != 0) throw ConfigError("null_point only defined for singleton M0");
    return family.mean_param(fixed_tail);
}

LossKind loss_by_name(const std::string& name) {
    if (name == "sq") return LossKind::SquaredError;
    if (name == "st") return LossKind::StandardizedSquared;
    if (name == "renyi") return LossKind::Renyi;
    if (name == "hellinger") return LossKind::SquaredHellinger;
    if (name == "kl") return LossKind::KL;
    throw ConfigError("unknown loss '" + name + "'");
}

Vec suff_mean(const std::vector<double>& sample, const FamilySpec& family) {
    if (sample.empty()) throw EmptySample();
    Vec acc(static_cast<std::size_t>(family.dim), 0.0);
    for (double x : sample) {
        Vec phi = family.suff_stat(x);
        for (int j = 0; j < family.dim; ++j) acc[static_cast<std::size_t>(j)] += phi[static_cast<std::size_t>(j)];
    }
    const double inv = 1.0 / static_cast<double>(sample.size());
    for (double& v : acc) v *= inv;
    return acc;
}

MeanParam mle(const std::vector<double>& sample, const FamilySpec& family) {
    Vec m = suff_mean(sample, family);
    if (!family.strictly_inside(m)) throw UndefinedMLE();
    return MeanParam{std::move(m), true};
}

std::optional<MeanParam> try_mle(const std::vector<double>& sample, const FamilySpec& family) {
    if (sample.empty()) return std::nullopt;
    Vec m = suff_mean(sample, family);
    if (!family.strictly_inside(m)) return std::nullopt;
    return MeanParam{std::move(m), true};
}

MeanParam project0(const MeanParam& mu1, const NestedPair& pair) {
    Vec v(static_cast<std::size_t>(pair.m1()));
    for (int j = 0; j < pair.m0; ++j) v[static_cast<std::size_t>(j)] = mu1.values[static_cast<std::size_t>(j)];
    for (int j = pair.m0; j < pair.m1(); ++j)
        v[static_cast<std::size_t>(j)] = pair.fixed_tail[static_cast<std::size_t>(j - pair.m0)];
    return pair.family.mean_param(std::move(v));
}

MeanParam map_estimate(const std::vector<double>& sample, const FamilySpec& family, double lambda0,
                       const MeanParam& anchor) {
    if (lambda0 <= 0.0) throw ConfigError("MAP prior strength must be positive");
    Vec acc(static_cast<std::size_t>(family.dim), 0.0);
    for (double x : sample) {
        Vec phi = family.suff_stat(x);
        for (int j = 0; j < family.dim; ++j) acc[static_cast<std::size_t>(j)] += phi[static_cast<std::size_t>(j)];
    }
    const double denom = static_cast<double>(sample.size()) + lambda0;
    for (int j = 0; j < family.dim; ++j) {
        std::size_t k = static_cast<std::size_t>(j);
        acc[k] = (acc[k] + lambda0 * anchor.values[k]) / denom;
    }
    return family.mean_param(std::move(acc));
}

MeanParam truncated_mle(const std::vector<double>& sample, const FamilySpec& family,
                        const BoxSchedule& box_schedule) {
    Vec m = suff_mean(sample, family);
    std::vector<Interval> box = box_schedule(static_cast<std::int64_t>(sample.size()));
    for (int j = 0; j < family.dim; ++j) {
        std::size_t k = static_cast<std::size_t>(j);
        m[k] = std::clamp(m[k], box[k].lo, box[k].hi);
    }
    return family.mean_param(std::move(m));
}

BoxSchedule default_box_schedule(const FamilySpec& family) {
    if (family.name == "bernoulli") {
        return [](std::int64_t n) {
            double eps = 1.0 / static_cast<double>(n + 1);
            return std::vector<Interval>{Interval{eps, 1.0 - eps}};
        };
    }
    if (family.name == "poisson") {
        return [](std::int64_t n) {
            double nd = static_cast<double>(n);
            return std::vector<Interval>{Interval{1.0 / (nd + 1.0), nd + 1.0}};
        };
    }
    if (family.name == "gaussian_meanvar") {
        // No product box can expand toward the full region {mu_1 > mu_2^2};
        // use the MAP estimator for this family instead.
        throw ConfigError("no default truncation box for the curved mean-variance family");
    }
    return [](std::int64_t n) {
        double nd = static_cast<double>(n);
        return std::vector<Interval>{Interval{-(nd + 1.0), nd + 1.0}};
    };
}

double loss(LossKind kind, const MeanParam& mu_ref, const MeanParam& mu_est, const FamilySpec& family) {
    const Vec& r = mu_ref.values;
    const Vec& e = mu_est.values;
    switch (kind) {
        case LossKind::SquaredError: {
            double s = 0.0;
            for (int j = 0; j < family.dim; ++j) s += sq(r[static_cast<std::size_t>(j)] - e[static_cast<std::size_t>(j)]);
            return s;
        }
        case LossKind::StandardizedSquared: {
            if (!mu_ref.inside) throw NonFiniteLoss("standardized loss needs the reference inside the mean space");
            SmallMatrix I = family.fisher_info(r);
            double s = 0.0;
            for (int i = 0; i < family.dim; ++i)
                for (int j = 0; j < family.dim; ++j)
                    s += (e[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(i)]) * I.at(i, j) *
                         (e[static_cast<std::size_t>(j)] - r[static_cast<std::size_t>(j)]);
            return s;
        }
        case LossKind::Renyi:
        case LossKind::SquaredHellinger:
        case LossKind::KL: {
            if (!mu_ref.inside || !mu_est.inside) throw NonFiniteLoss();
            double v;
            if (kind == LossKind::KL) {
                v = family.kl(r, e);
            } else {
                double dr = family.renyi_half(r, e);
                v = (kind == LossKind::Renyi) ? dr : -2.0 * std::expm1(-0.5 * dr);
            }
            if (!std::isfinite(v)) throw NonFiniteLoss();
            return v;
        }
    }
    throw Error("unreachable loss kind");
}

}  // namespace switchsel
