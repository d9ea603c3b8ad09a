#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "switchsel/switchcrit.hpp"

namespace switchsel {

enum class CriterionKind { Switch, BayesFactor, AIC, BIC, HannanQuinn };

CriterionKind criterion_by_name(const std::string& name);
std::string criterion_name(CriterionKind k);

/// One selection outcome. `evidence` is the criterion's native comparison
/// output: the odds ratio r for Switch and BayesFactor (log_evidence is its
/// exact log), the penalized log likelihood ratio for AIC/BIC/HQ (already on
/// log scale; log_evidence repeats it).
struct Decision {
    int selected = 0;
    double evidence = 1.0;
    double log_evidence = 0.0;
    std::int64_t n = 0;
};

// Bayes factor model selection at equal model priors: evidence
// p_{B,0}/p_{B,1}, select the complex model iff evidence < 1.
Decision bfms_select(const MarginalState& s0, const MarginalState& s1);

// log p_{mu1_hat}(x^n) - log p_{mu0_hat}(x^n) from the sufficient mean, using
// the exponential-family identity log LR = n * KL(mu1_hat || mu0_hat).
// Throws UndefinedMLE when either constrained MLE is not strictly inside.
double mle_log_lr(const NestedPair& pair, const Vec& suff_mean_value, std::int64_t n);

// Conservative AIC: evidence = log LR - (m1 - m0); select 1 iff
// evidence >= -log t (t = 1 recovers standard AIC).
Decision aic_select(const std::vector<double>& sample, const NestedPair& pair, double threshold_t = 1.0);

// Schwarz penalty: evidence = log LR - ((m1-m0)/2) log n; select 1 iff > 0.
Decision bic_select(const std::vector<double>& sample, const NestedPair& pair);

// Hannan-Quinn: evidence = log LR - c log log n (n >= 3); ties select the
// complex model.
Decision hq_select(const std::vector<double>& sample, const NestedPair& pair, double c);

// delta_sw wrapped with evidence r_sw.
Decision switch_select(const SwitchState& state, double gamma = 1.0);

// Threshold t making the conservative AIC test coincide with the level-alpha
// GLRT for a one-dimensional gap: t = exp(1 - z_{alpha/2}^2 / 2).
double aic_glrt_threshold(double alpha);
// The 2/z_{alpha/2}^2 calibration; approximate (see aic_glrt_threshold for
// the exact fixed-n level).
double aic_threshold_from_z(double alpha);

/// Absorbing sequential test wrapper. Only Switch and BayesFactor evidence is
/// accepted; the anytime Type-I guarantee additionally requires a singleton
/// M0, which callers enforce at configuration time.
class RobustTest {
  public:
    RobustTest(CriterionKind kind, double alpha);
    // Feed the decision at sample size n; returns the rejected-so-far state.
    bool observe(const Decision& d);
    bool rejected() const { return rejected_; }
    double alpha() const { return alpha_; }

  private:
    double alpha_;
    double log_alpha_ = 0.0;
    bool rejected_ = false;
};

// ---- Post-model-selection estimation ---------------------------------------

struct EstimatorSpec {
    enum class Kind { MLE, MAP, TruncatedMLE };
    Kind kind = Kind::MLE;
    double lambda0 = 1.0;       // MAP prior strength
    Vec anchor;                 // MAP anchor; empty = family default
    BoxSchedule box_schedule;   // truncated MLE; null = family default
};

EstimatorSpec estimator_by_name(const std::string& name, const FamilySpec& family);

// Full-model estimate for the requested estimator kind (throws UndefinedMLE
// for the MLE kind on boundary samples).
MeanParam estimate(const std::vector<double>& sample, const FamilySpec& family, const EstimatorSpec& est);

// mu_breve_{k_breve}: the M0 estimate (projection of est0's full-model
// estimate, tail pinned) when decision.selected == 0, else est1's estimate.
MeanParam post_selection_estimate(const Decision& decision, const std::vector<double>& sample,
                                  const NestedPair& pair, const EstimatorSpec& est0,
                                  const EstimatorSpec& est1);

}  // namespace switchsel
