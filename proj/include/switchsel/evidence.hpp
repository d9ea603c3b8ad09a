#pragma once
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "switchsel/expfam.hpp"

namespace switchsel {

/// Prior given as an explicit density over an integration chart. The chart
/// maps integration variables to mean parameters with unit Jacobian (identity
/// for the 1-D built-ins; (m, sigma^2) -> (m^2 + sigma^2, m) for the
/// mean-variance family, whose Jacobian determinant is -1).
struct NumericPrior {
    std::function<double(const Vec&)> density;
    std::vector<Interval> box;                 // integration box per chart coordinate
    int nodes_per_dim = 129;                   // initial trapezoid grid
    std::function<Vec(const Vec&)> to_mean;    // null = identity
};

/// Sequential Bayes-marginal accumulator for one model. log_marginal always
/// equals the sum of the per-observation log predictive densities, so the
/// chain rule and prefix splits hold exactly.
class MarginalState {
  public:
    enum class Kind { Point, NormalMean, BetaBernoulli, GammaPoisson, NormalInvGamma, GammaPrecision, Numeric };

    // Singleton model: p_B = p_{mu0}.
    static MarginalState point(const FamilySpec& family, MeanParam mu0);
    // Gaussian location with known sigma, Normal(prior_mean, prior_var) prior on the mean.
    static MarginalState normal_mean(double sigma, double prior_mean, double prior_var);
    static MarginalState beta_bernoulli(double a, double b);
    static MarginalState gamma_poisson(double shape, double rate);
    // Gaussian with unknown mean and variance; NIG(m, kappa, a, b) prior.
    static MarginalState normal_inverse_gamma(double m, double kappa, double a, double b);
    // Gaussian with pinned mean and free variance; Gamma(shape, rate) prior on
    // the precision (the composite M0 of the mean-variance pair).
    static MarginalState gamma_precision(double shape, double rate, double pinned_mean = 0.0);
    // Grid-based marginal for an arbitrary smooth prior (oracle-grade).
    static MarginalState numeric(const FamilySpec& family, NumericPrior prior);

    std::int64_t n() const { return n_; }
    double log_marginal() const { return log_marginal_; }
    int model_dim() const { return model_dim_; }

    // The increment update(x) would add, without mutating.
    double log_predictive(double x) const;
    void update(double x);

    // Posterior hyperparameters (meaning depends on the kind); for tests.
    const std::array<double, 4>& hyper() const { return h_; }
    Kind kind() const { return kind_; }

    // Numeric kind only: log integral of the prior over its grid. log_marginal
    // is normalized so it starts at 0; the raw integral of prior * likelihood
    // is log_marginal() + log_grid_prior_mass().
    double log_grid_prior_mass() const;

  private:
    MarginalState() = default;

    Kind kind_ = Kind::Point;
    int model_dim_ = 0;
    std::int64_t n_ = 0;
    double log_marginal_ = 0.0;
    std::array<double, 4> h_{0, 0, 0, 0};
    double sigma_ = 1.0;  // NormalMean observation sd / GammaPrecision pinned mean

    // Point fast path: natural parameter, log partition and carrier constants
    // for the built-in families (pt_code_: 0 gauss_loc, 1 bernoulli,
    // 2 poisson, 3 meanvar; -1 = generic callback path).
    int pt_code_ = -1;
    std::array<double, 2> pt_theta_{0, 0};
    double pt_psi_ = 0.0;
    double pt_s2_ = 1.0;

    // Point and Numeric kinds.
    std::shared_ptr<const FamilySpec> family_;
    MeanParam mu0_;
    struct NumericGrid;
    std::shared_ptr<const NumericGrid> grid_;   // immutable nodes
    std::vector<double> node_loglik_;           // running per-node log likelihood

    double numeric_log_marginal(const std::vector<double>& loglik) const;
};

// log integral of prior * likelihood by adaptive log-domain trapezoid
// refinement; grids double until successive estimates differ by < tol, node
// cap 2^15 per dimension. Throws GridTooCoarse past the cap.
double quadrature_log_marginal(const FamilySpec& family, const NumericPrior& prior,
                               const std::vector<double>& sample, double tol = 1e-6);

// Integral of the prior density over its box (should be ~1 for a proper prior).
double numeric_prior_mass(const NumericPrior& prior);

// log p_{mu_hat}(x^n) - log p_B(x^n) - (m/2) log(n / 2 pi). Stabilizes to
// log(sqrt(det I(mu_hat)) / omega(mu_hat)) as n grows.
double laplace_diagnostic(const MarginalState& state, const FamilySpec& family,
                          const std::vector<double>& sample);

}  // namespace switchsel
