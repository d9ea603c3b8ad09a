#pragma once
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "switchsel/errors.hpp"

namespace switchsel {

using Vec = std::vector<double>;

// Open interval; unbounded endpoints are +-inf.
struct Interval {
    double lo;
    double hi;
    bool contains_strictly(double x) const { return x > lo && x < hi; }
    bool contains_closed(double x) const { return x >= lo && x <= hi; }
};

// Symmetric m x m matrix, m <= 2, row-major.
struct SmallMatrix {
    int dim = 1;
    std::array<double, 4> a{0, 0, 0, 0};
    double at(int i, int j) const { return a[static_cast<std::size_t>(i * dim + j)]; }
    // Positive definiteness via leading principal minors (m <= 2).
    bool spd(double sym_tol = 1e-9) const {
        if (dim == 1) return a[0] > 0.0;
        if (std::abs(a[1] - a[2]) > sym_tol * (1.0 + std::abs(a[1]))) return false;
        return a[0] > 0.0 && a[0] * a[3] - a[1] * a[2] > 0.0;
    }
};

struct MeanParam {
    Vec values;
    bool inside = false;  // strictly inside the mean space
};

/// An exponential family in its mean-value parameterization. Observations are
/// scalar for all built-ins; the sufficient statistic has dimension `dim`.
struct FamilySpec {
    std::string name;
    int dim = 1;

    std::function<Vec(double)> suff_stat;                  // phi(x)
    std::function<double(double)> log_carrier;             // log r(x)
    std::function<double(const Vec&)> log_partition;       // psi(theta)
    std::function<Vec(const Vec&)> mean_map;               // mu(theta)
    std::function<Vec(const Vec&)> nat_map;                // theta(mu)
    std::function<SmallMatrix(const Vec&)> fisher_info;    // I(mu)
    std::vector<Interval> mean_space;
    // Validity beyond the coordinate box (the Gaussian mean-variance family
    // additionally needs mu_1 > mu_2^2). Null means box-only.
    std::function<bool(const Vec&)> mean_constraint;
    std::function<bool(double)> in_support;

    // Closed-form divergences, reference parameter first (the expectation in
    // d_R and KL is taken under the first argument).
    std::function<double(const Vec&, const Vec&)> kl;
    std::function<double(const Vec&, const Vec&)> renyi_half;

    bool strictly_inside(const Vec& mu) const {
        for (int j = 0; j < dim; ++j)
            if (!mean_space[static_cast<std::size_t>(j)].contains_strictly(mu[static_cast<std::size_t>(j)]))
                return false;
        return !mean_constraint || mean_constraint(mu);
    }

    MeanParam mean_param(Vec mu) const {
        MeanParam p;
        p.inside = strictly_inside(mu);
        p.values = std::move(mu);
        return p;
    }

    double log_density(const Vec& mu, double x) const {
        Vec theta = nat_map(mu);
        Vec phi = suff_stat(x);
        double dot = 0.0;
        for (int j = 0; j < dim; ++j)
            dot += theta[static_cast<std::size_t>(j)] * phi[static_cast<std::size_t>(j)];
        return dot - log_partition(theta) + log_carrier(x);
    }
    double log_density(const MeanParam& mu, double x) const { return log_density(mu.values, x); }
};

// Built-in families.
FamilySpec gaussian_location(double sigma = 1.0);
FamilySpec bernoulli_family();
FamilySpec poisson_family();
// Mean parameters (E[X^2], E[X]) of a Gaussian with unknown mean and variance;
// valid iff mu_1 > mu_2^2.
FamilySpec gaussian_mean_variance();

FamilySpec family_by_name(const std::string& name, double sigma = 1.0);

/// Nested pair: the complex family plus the simple submodel obtained by
/// pinning the final m1-m0 mean coordinates.
struct NestedPair {
    FamilySpec family;
    int m0 = 0;
    Vec fixed_tail;

    NestedPair(FamilySpec fam, int m0_, Vec tail);
    int m1() const { return family.dim; }
    int dim_gap() const { return family.dim - m0; }
    bool singleton() const { return m0 == 0; }
    // The single point of M0 (only when m0 == 0).
    MeanParam null_point() const;
};

enum class LossKind { SquaredError, StandardizedSquared, Renyi, SquaredHellinger, KL };

LossKind loss_by_name(const std::string& name);

// ---- Operations -----------------------------------------------------------

// n^{-1} sum phi(x_i).
Vec suff_mean(const std::vector<double>& sample, const FamilySpec& family);

// Mean of phi wrapped as a MeanParam; throws UndefinedMLE on/outside the
// boundary. try_mle is the non-throwing variant for hot loops.
MeanParam mle(const std::vector<double>& sample, const FamilySpec& family);
std::optional<MeanParam> try_mle(const std::vector<double>& sample, const FamilySpec& family);

// Projection onto M0: copy the first m0 coordinates, pin the tail.
MeanParam project0(const MeanParam& mu1, const NestedPair& pair);

// Conjugate-prior MAP point (sum phi + lambda0 * anchor) / (n + lambda0);
// returns the anchor for an empty sample.
MeanParam map_estimate(const std::vector<double>& sample, const FamilySpec& family, double lambda0,
                       const MeanParam& anchor);

// Closed box strictly inside the mean space, expanding with n (gap O(1/n)).
using BoxSchedule = std::function<std::vector<Interval>(std::int64_t)>;

// Coordinate-wise clamp of the sufficient mean onto box_schedule(n).
MeanParam truncated_mle(const std::vector<double>& sample, const FamilySpec& family,
                        const BoxSchedule& box_schedule);

// Default expanding box for a family, gap <= 1/(n+1) toward each finite
// endpoint (unbounded ends grow like n). For the mean-variance family the box
// respects the curvature constraint.
BoxSchedule default_box_schedule(const FamilySpec& family);

// Loss of mu_est as an approximation of mu_ref. Squared Hellinger is always
// derived from Renyi through d_H2 = 2(1 - exp(-d_R/2)).
double loss(LossKind kind, const MeanParam& mu_ref, const MeanParam& mu_est, const FamilySpec& family);

}  // namespace switchsel
