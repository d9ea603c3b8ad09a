#include "switchsel/criteria.hpp"

#include <cmath>

#include "switchsel/stats.hpp"

namespace switchsel {

CriterionKind criterion_by_name(const std::string& name) {
    if (name == "switch") return CriterionKind::Switch;
    if (name == "bayes") return CriterionKind::BayesFactor;
    if (name == "aic") return CriterionKind::AIC;
    if (name == "bic") return CriterionKind::BIC;
    if (name == "hq") return CriterionKind::HannanQuinn;
    throw ConfigError("unknown criterion '" + name + "' (expected switch|bayes|aic|bic|hq)");
}

std::string criterion_name(CriterionKind k) {
    switch (k) {
        case CriterionKind::Switch: return "switch";
        case CriterionKind::BayesFactor: return "bayes";
        case CriterionKind::AIC: return "aic";
        case CriterionKind::BIC: return "bic";
        case CriterionKind::HannanQuinn: return "hq";
    }
    return "?";
}

Decision bfms_select(const MarginalState& s0, const MarginalState& s1) {
    if (s0.n() != s1.n()) throw MismatchedN();
    Decision d;
    d.n = s0.n();
    d.log_evidence = s0.log_marginal() - s1.log_marginal();
    d.evidence = std::exp(d.log_evidence);
    d.selected = d.log_evidence < 0.0 ? 1 : 0;
    return d;
}

double mle_log_lr(const NestedPair& pair, const Vec& sm, std::int64_t n) {
    if (!pair.family.strictly_inside(sm)) throw UndefinedMLE();
    MeanParam mu1{sm, true};
    MeanParam mu0 = project0(mu1, pair);
    if (!mu0.inside) throw UndefinedMLE("projected MLE not strictly inside M0");
    // log p_{mu1hat}(x^n) - log p_{mu0hat}(x^n) = n D(mu1hat || mu0hat) when
    // mu1hat is the sufficient mean (KL robustness for exponential families).
    return static_cast<double>(n) * pair.family.kl(mu1.values, mu0.values);
}

namespace {

Decision penalized_lr(const std::vector<double>& sample, const NestedPair& pair, double penalty,
                      bool select_on_tie) {
    Vec sm = suff_mean(sample, pair.family);
    Decision d;
    d.n = static_cast<std::int64_t>(sample.size());
    d.log_evidence = mle_log_lr(pair, sm, d.n) - penalty;
    d.evidence = d.log_evidence;
    d.selected = (d.log_evidence > 0.0 || (select_on_tie && d.log_evidence == 0.0)) ? 1 : 0;
    return d;
}

}  // namespace

Decision aic_select(const std::vector<double>& sample, const NestedPair& pair, double threshold_t) {
    if (threshold_t <= 0.0) throw ConfigError("AIC threshold must be positive");
    Vec sm = suff_mean(sample, pair.family);
    Decision d;
    d.n = static_cast<std::int64_t>(sample.size());
    d.log_evidence = mle_log_lr(pair, sm, d.n) - static_cast<double>(pair.dim_gap());
    d.evidence = d.log_evidence;
    // Strict: at t = 1 this is the standard criterion, which keeps the simple
    // model on an exact tie.
    d.selected = d.log_evidence > -std::log(threshold_t) ? 1 : 0;
    return d;
}

Decision bic_select(const std::vector<double>& sample, const NestedPair& pair) {
    double penalty = 0.5 * static_cast<double>(pair.dim_gap()) *
                     std::log(static_cast<double>(sample.size()));
    return penalized_lr(sample, pair, penalty, /*select_on_tie=*/false);
}

Decision hq_select(const std::vector<double>& sample, const NestedPair& pair, double c) {
    if (c <= 0.0) throw ConfigError("Hannan-Quinn constant must be positive");
    if (sample.size() < 3) throw NTooSmall();
    double penalty = c * std::log(std::log(static_cast<double>(sample.size())));
    // exact ties select the complex model
    return penalized_lr(sample, pair, penalty, /*select_on_tie=*/true);
}

Decision switch_select(const SwitchState& state, double gamma) {
    Decision d;
    d.n = state.n();
    d.log_evidence = state.log_r_sw();
    d.evidence = std::exp(d.log_evidence);
    d.selected = state.select(gamma);
    return d;
}

double aic_glrt_threshold(double alpha) {
    double z = normal_quantile(1.0 - 0.5 * alpha);
    return std::exp(1.0 - 0.5 * z * z);
}

double aic_threshold_from_z(double alpha) {
    double z = normal_quantile(1.0 - 0.5 * alpha);
    return 2.0 / (z * z);
}

RobustTest::RobustTest(CriterionKind kind, double alpha) : alpha_(alpha) {
    if (kind != CriterionKind::Switch && kind != CriterionKind::BayesFactor)
        throw NotAnytimeValid(criterion_name(kind) + " evidence has no stopping-rule-free Type-I bound");
    if (alpha < 0.0 || alpha >= 1.0) throw ConfigError("alpha must lie in [0, 1)");
    log_alpha_ = std::log(alpha);  // -inf at alpha = 0, which never rejects
}

bool RobustTest::observe(const Decision& d) {
    if (!rejected_ && d.log_evidence <= log_alpha_) rejected_ = true;
    return rejected_;
}

EstimatorSpec estimator_by_name(const std::string& name, const FamilySpec& family) {
    EstimatorSpec e;
    if (name == "mle") {
        e.kind = EstimatorSpec::Kind::MLE;
    } else if (name == "map") {
        e.kind = EstimatorSpec::Kind::MAP;
    } else if (name == "truncated") {
        e.kind = EstimatorSpec::Kind::TruncatedMLE;
        e.box_schedule = default_box_schedule(family);
    } else {
        throw ConfigError("unknown estimator '" + name + "' (expected mle|map|truncated)");
    }
    return e;
}

namespace {

Vec default_anchor(const FamilySpec& family) {
    if (family.name == "bernoulli") return {0.5};
    if (family.name == "poisson") return {1.0};
    if (family.name == "gaussian_meanvar") return {2.0, 0.0};
    return {0.0};
}

}  // namespace

MeanParam estimate(const std::vector<double>& sample, const FamilySpec& family, const EstimatorSpec& est) {
    switch (est.kind) {
        case EstimatorSpec::Kind::MLE:
            return mle(sample, family);
        case EstimatorSpec::Kind::MAP: {
            Vec anchor = est.anchor.empty() ? default_anchor(family) : est.anchor;
            return map_estimate(sample, family, est.lambda0, family.mean_param(anchor));
        }
        case EstimatorSpec::Kind::TruncatedMLE: {
            const BoxSchedule& sched = est.box_schedule ? est.box_schedule : default_box_schedule(family);
            return truncated_mle(sample, family, sched);
        }
    }
    throw Error("unreachable estimator kind");
}

MeanParam post_selection_estimate(const Decision& decision, const std::vector<double>& sample,
                                  const NestedPair& pair, const EstimatorSpec& est0,
                                  const EstimatorSpec& est1) {
    if (decision.selected == 0)
        return project0(estimate(sample, pair.family, est0), pair);
    return estimate(sample, pair.family, est1);
}

}  // namespace switchsel
