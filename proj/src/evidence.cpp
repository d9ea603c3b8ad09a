#include "switchsel/evidence.hpp"

#include <algorithm>
#include <cmath>

#include "switchsel/stats.hpp"

namespace switchsel {

namespace {

double log_normal_pdf(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

// Student-t with df nu, location loc, squared scale s2.
double log_t_pdf(double x, double nu, double loc, double s2) {
    double d = x - loc;
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(nu * 3.14159265358979323846 * s2) -
           0.5 * (nu + 1.0) * std::log1p(d * d / (nu * s2));
}

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

struct MarginalState::NumericGrid {
    std::vector<Vec> mean_points;      // mapped through the chart
    std::vector<double> log_prior_w;   // log prior + log trapezoid weight (-inf for invalid nodes)
    const FamilySpec* family = nullptr;
    std::shared_ptr<const FamilySpec> family_owner;
};

MarginalState MarginalState::point(const FamilySpec& family, MeanParam mu0) {
    require(mu0.inside, "point marginal needs a parameter strictly inside the mean space");
    MarginalState s;
    s.kind_ = Kind::Point;
    s.model_dim_ = 0;
    s.family_ = std::make_shared<FamilySpec>(family);
    s.mu0_ = std::move(mu0);
    Vec theta = family.nat_map(s.mu0_.values);
    s.pt_theta_[0] = theta[0];
    if (family.dim > 1) s.pt_theta_[1] = theta[1];
    s.pt_psi_ = family.log_partition(theta);
    if (family.name == "gaussian_location") {
        s.pt_code_ = 0;
        s.pt_s2_ = 1.0 / family.fisher_info(s.mu0_.values).at(0, 0);
    } else if (family.name == "bernoulli") {
        s.pt_code_ = 1;
    } else if (family.name == "poisson") {
        s.pt_code_ = 2;
    } else if (family.name == "gaussian_meanvar") {
        s.pt_code_ = 3;
    }
    return s;
}

MarginalState MarginalState::normal_mean(double sigma, double prior_mean, double prior_var) {
    require(sigma > 0.0 && prior_var > 0.0, "normal_mean needs positive sigma and prior variance");
    MarginalState s;
    s.kind_ = Kind::NormalMean;
    s.model_dim_ = 1;
    s.sigma_ = sigma;
    s.h_ = {prior_mean, prior_var, 0, 0};
    return s;
}

MarginalState MarginalState::beta_bernoulli(double a, double b) {
    require(a > 0.0 && b > 0.0, "beta prior needs positive hyperparameters");
    MarginalState s;
    s.kind_ = Kind::BetaBernoulli;
    s.model_dim_ = 1;
    s.h_ = {a, b, 0, 0};
    return s;
}

MarginalState MarginalState::gamma_poisson(double shape, double rate) {
    require(shape > 0.0 && rate > 0.0, "gamma prior needs positive hyperparameters");
    MarginalState s;
    s.kind_ = Kind::GammaPoisson;
    s.model_dim_ = 1;
    s.h_ = {shape, rate, 0, 0};
    return s;
}

MarginalState MarginalState::normal_inverse_gamma(double m, double kappa, double a, double b) {
    require(kappa > 0.0 && a > 0.0 && b > 0.0, "NIG prior needs positive kappa, a, b");
    MarginalState s;
    s.kind_ = Kind::NormalInvGamma;
    s.model_dim_ = 2;
    s.h_ = {m, kappa, a, b};
    return s;
}

MarginalState MarginalState::gamma_precision(double shape, double rate, double pinned_mean) {
    require(shape > 0.0 && rate > 0.0, "gamma prior needs positive hyperparameters");
    MarginalState s;
    s.kind_ = Kind::GammaPrecision;
    s.model_dim_ = 1;
    s.sigma_ = pinned_mean;
    s.h_ = {shape, rate, 0, 0};
    return s;
}

MarginalState MarginalState::numeric(const FamilySpec& family, NumericPrior prior) {
    require(!prior.box.empty() && prior.nodes_per_dim >= 3, "numeric prior needs a box and >= 3 nodes per dim");
    const int d = static_cast<int>(prior.box.size());
    require(d <= 2, "numeric marginal supports at most 2 chart dimensions");

    auto grid = std::make_shared<NumericGrid>();
    grid->family_owner = std::make_shared<FamilySpec>(family);
    grid->family = grid->family_owner.get();

    const int g = prior.nodes_per_dim;
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(d));
    std::vector<double> steps(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        const Interval& iv = prior.box[static_cast<std::size_t>(k)];
        double h = (iv.hi - iv.lo) / static_cast<double>(g - 1);
        steps[static_cast<std::size_t>(k)] = h;
        auto& ax = axes[static_cast<std::size_t>(k)];
        ax.resize(static_cast<std::size_t>(g));
        for (int i = 0; i < g; ++i) ax[static_cast<std::size_t>(i)] = iv.lo + h * i;
    }
    auto node_weight = [&](int idx, int k) {
        double w = steps[static_cast<std::size_t>(k)];
        return (idx == 0 || idx == g - 1) ? 0.5 * w : w;
    };
    const int total = (d == 1) ? g : g * g;
    grid->mean_points.reserve(static_cast<std::size_t>(total));
    grid->log_prior_w.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
        Vec pt;
        double logw;
        if (d == 1) {
            pt = {axes[0][static_cast<std::size_t>(i)]};
            logw = std::log(node_weight(i, 0));
        } else {
            int r = i / g, c = i % g;
            pt = {axes[0][static_cast<std::size_t>(r)], axes[1][static_cast<std::size_t>(c)]};
            logw = std::log(node_weight(r, 0) * node_weight(c, 1));
        }
        double dens = prior.density(pt);
        Vec mu = prior.to_mean ? prior.to_mean(pt) : pt;
        bool ok = dens > 0.0 && family.strictly_inside(mu);
        grid->mean_points.push_back(std::move(mu));
        grid->log_prior_w.push_back(ok ? std::log(dens) + logw : kNegInf);
    }

    MarginalState s;
    s.kind_ = Kind::Numeric;
    s.model_dim_ = d;
    s.grid_ = std::move(grid);
    s.node_loglik_.assign(s.grid_->mean_points.size(), 0.0);
    return s;
}

double MarginalState::numeric_log_marginal(const std::vector<double>& loglik) const {
    double m = kNegInf;
    const auto& pw = grid_->log_prior_w;
    for (std::size_t i = 0; i < pw.size(); ++i) {
        double v = pw[i] + loglik[i];
        if (v > m) m = v;
    }
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (std::size_t i = 0; i < pw.size(); ++i) s += std::exp(pw[i] + loglik[i] - m);
    return m + std::log(s);
}

double MarginalState::log_predictive(double x) const {
    double lp;
    switch (kind_) {
        case Kind::Point:
            switch (pt_code_) {
                case 0:
                    if (!std::isfinite(x)) throw InvalidObservation();
                    lp = pt_theta_[0] * x - pt_psi_ - 0.5 * (kLog2Pi + std::log(pt_s2_)) -
                         0.5 * x * x / pt_s2_;
                    break;
                case 1:
                    if (x != 0.0 && x != 1.0) throw InvalidObservation("Bernoulli observation must be 0 or 1");
                    lp = pt_theta_[0] * x - pt_psi_;
                    break;
                case 2:
                    if (!(x >= 0.0 && x == std::floor(x)))
                        throw InvalidObservation("Poisson observation must be a nonnegative integer");
                    lp = pt_theta_[0] * x - pt_psi_ - std::lgamma(x + 1.0);
                    break;
                case 3:
                    if (!std::isfinite(x)) throw InvalidObservation();
                    lp = pt_theta_[0] * x * x + pt_theta_[1] * x - pt_psi_;
                    break;
                default:
                    if (!family_->in_support(x)) throw InvalidObservation();
                    lp = family_->log_density(mu0_, x);
                    break;
            }
            break;
        case Kind::NormalMean:
            if (!std::isfinite(x)) throw InvalidObservation();
            lp = log_normal_pdf(x, h_[0], h_[1] + sigma_ * sigma_);
            break;
        case Kind::BetaBernoulli:
            if (x != 0.0 && x != 1.0) throw InvalidObservation("Bernoulli observation must be 0 or 1");
            lp = (x == 1.0) ? std::log(h_[0] / (h_[0] + h_[1])) : std::log(h_[1] / (h_[0] + h_[1]));
            break;
        case Kind::GammaPoisson: {
            if (!(x >= 0.0 && x == std::floor(x))) throw InvalidObservation("Poisson observation must be a nonnegative integer");
            double a = h_[0], b = h_[1];
            lp = std::lgamma(x + a) - std::lgamma(a) - std::lgamma(x + 1.0) + a * std::log(b / (b + 1.0)) -
                 x * std::log1p(b);
            break;
        }
        case Kind::NormalInvGamma: {
            if (!std::isfinite(x)) throw InvalidObservation();
            double m = h_[0], kappa = h_[1], a = h_[2], b = h_[3];
            lp = log_t_pdf(x, 2.0 * a, m, b * (kappa + 1.0) / (a * kappa));
            break;
        }
        case Kind::GammaPrecision: {
            if (!std::isfinite(x)) throw InvalidObservation();
            double a = h_[0], b = h_[1];
            lp = log_t_pdf(x, 2.0 * a, sigma_, b / a);
            break;
        }
        case Kind::Numeric: {
            if (!grid_->family->in_support(x)) throw InvalidObservation();
            std::vector<double> next = node_loglik_;
            for (std::size_t i = 0; i < next.size(); ++i)
                if (grid_->log_prior_w[i] != kNegInf) next[i] += grid_->family->log_density(grid_->mean_points[i], x);
            lp = numeric_log_marginal(next) - numeric_log_marginal(node_loglik_);
            break;
        }
        default:
            throw Error("bad marginal kind");
    }
    if (lp == kNegInf) throw NumericUnderflow();
    return lp;
}

void MarginalState::update(double x) {
    log_marginal_ += log_predictive(x);
    ++n_;
    switch (kind_) {
        case Kind::Point:
            break;
        case Kind::NormalMean: {
            double v = h_[1], m = h_[0], s2 = sigma_ * sigma_;
            double vpost = 1.0 / (1.0 / v + 1.0 / s2);
            h_[0] = vpost * (m / v + x / s2);
            h_[1] = vpost;
            break;
        }
        case Kind::BetaBernoulli:
            h_[0] += x;
            h_[1] += 1.0 - x;
            break;
        case Kind::GammaPoisson:
            h_[0] += x;
            h_[1] += 1.0;
            break;
        case Kind::NormalInvGamma: {
            double m = h_[0], kappa = h_[1];
            h_[3] += kappa * (x - m) * (x - m) / (2.0 * (kappa + 1.0));
            h_[0] = (kappa * m + x) / (kappa + 1.0);
            h_[1] = kappa + 1.0;
            h_[2] += 0.5;
            break;
        }
        case Kind::GammaPrecision:
            h_[0] += 0.5;
            h_[1] += 0.5 * (x - sigma_) * (x - sigma_);
            break;
        case Kind::Numeric:
            for (std::size_t i = 0; i < node_loglik_.size(); ++i)
                if (grid_->log_prior_w[i] != kNegInf)
                    node_loglik_[i] += grid_->family->log_density(grid_->mean_points[i], x);
            break;
    }
}

double MarginalState::log_grid_prior_mass() const {
    if (kind_ != Kind::Numeric) throw Error("log_grid_prior_mass applies to numeric marginals only");
    std::vector<double> zero(node_loglik_.size(), 0.0);
    return numeric_log_marginal(zero);
}

double quadrature_log_marginal(const FamilySpec& family, const NumericPrior& prior,
                               const std::vector<double>& sample, double tol) {
    const int d = static_cast<int>(prior.box.size());
    const int cap = (d == 1) ? (1 << 15) + 1 : 181;  // <= 2^15 nodes in total

    auto evaluate = [&](int g) {
        NumericPrior p = prior;
        p.nodes_per_dim = g;
        MarginalState s = MarginalState::numeric(family, p);
        for (double x : sample) s.update(x);
        // raw integral of prior * likelihood, prior mass included
        return s.log_marginal() + s.log_grid_prior_mass();
    };

    int g = std::max(9, prior.nodes_per_dim);
    double prev = evaluate(g);
    while (true) {
        int next = 2 * (g - 1) + 1;
        if (next > cap) throw GridTooCoarse();
        double cur = evaluate(next);
        if (std::abs(cur - prev) < tol) return cur;
        prev = cur;
        g = next;
    }
}

double numeric_prior_mass(const NumericPrior& prior) {
    const int d = static_cast<int>(prior.box.size());
    const int g = (d == 1) ? 8193 : 257;
    std::vector<double> axes_h(static_cast<std::size_t>(d));
    double mass = 0.0;
    if (d == 1) {
        const Interval& iv = prior.box[0];
        double h = (iv.hi - iv.lo) / (g - 1);
        for (int i = 0; i < g; ++i) {
            double w = (i == 0 || i == g - 1) ? 0.5 * h : h;
            mass += w * prior.density({iv.lo + h * i});
        }
    } else {
        double h0 = (prior.box[0].hi - prior.box[0].lo) / (g - 1);
        double h1 = (prior.box[1].hi - prior.box[1].lo) / (g - 1);
        for (int i = 0; i < g; ++i) {
            double wi = (i == 0 || i == g - 1) ? 0.5 * h0 : h0;
            for (int j = 0; j < g; ++j) {
                double wj = (j == 0 || j == g - 1) ? 0.5 * h1 : h1;
                mass += wi * wj * prior.density({prior.box[0].lo + h0 * i, prior.box[1].lo + h1 * j});
            }
        }
    }
    return mass;
}

double laplace_diagnostic(const MarginalState& state, const FamilySpec& family,
                          const std::vector<double>& sample) {
    if (state.n() != static_cast<std::int64_t>(sample.size())) throw MismatchedN();
    MeanParam mu_hat = mle(sample, family);  // UndefinedMLE passes through
    double logp = 0.0;
    for (double x : sample) logp += family.log_density(mu_hat, x);
    double n = static_cast<double>(sample.size());
    double m = static_cast<double>(state.model_dim());
    return logp - state.log_marginal() - 0.5 * m * std::log(n / (2.0 * 3.14159265358979323846));
}

}  // namespace switchsel
