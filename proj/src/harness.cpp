#include "switchsel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "switchsel/stats.hpp"

namespace switchsel {

namespace {

int resolve_workers(int w) {
    if (w > 0) return w;
    unsigned h = std::thread::hardware_concurrency();
    return h ? static_cast<int>(h) : 1;
}

// Every job writes only to its own output slot, so scheduling cannot change
// the result; worker count only changes wall time.
void parallel_jobs(int workers, std::int64_t njobs, const std::function<void(std::int64_t)>& job) {
    workers = static_cast<int>(std::min<std::int64_t>(resolve_workers(workers), njobs));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < njobs; ++i) job(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            std::int64_t i;
            while (!failed.load(std::memory_order_relaxed) && (i = next.fetch_add(1)) < njobs) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

constexpr std::int64_t kRepBlocks = 64;

enum class SimCriterion { Switch, Bayes, AIC, BIC, HQ, Always0, Always1 };

SimCriterion sim_criterion_by_name(const std::string& s) {
    if (s == "always0") return SimCriterion::Always0;
    if (s == "always1") return SimCriterion::Always1;
    switch (criterion_by_name(s)) {
        case CriterionKind::Switch: return SimCriterion::Switch;
        case CriterionKind::BayesFactor: return SimCriterion::Bayes;
        case CriterionKind::AIC: return SimCriterion::AIC;
        case CriterionKind::BIC: return SimCriterion::BIC;
        case CriterionKind::HannanQuinn: return SimCriterion::HQ;
    }
    throw ConfigError("unknown criterion '" + s + "'");
}

// Allocation-free log LR from running sufficient sums.
struct LrEval {
    const NestedPair* pair;
    Vec b1, b0;
    explicit LrEval(const NestedPair& p)
        : pair(&p), b1(static_cast<std::size_t>(p.m1())), b0(static_cast<std::size_t>(p.m1())) {}

    // Returns false when either constrained MLE is undefined.
    bool log_lr(double s0, double s1, std::int64_t n, double* out) {
        double inv = 1.0 / static_cast<double>(n);
        b1[0] = s0 * inv;
        if (pair->m1() > 1) b1[1] = s1 * inv;
        if (!pair->family.strictly_inside(b1)) return false;
        for (int j = 0; j < pair->m0; ++j) b0[static_cast<std::size_t>(j)] = b1[static_cast<std::size_t>(j)];
        for (int j = pair->m0; j < pair->m1(); ++j)
            b0[static_cast<std::size_t>(j)] = pair->fixed_tail[static_cast<std::size_t>(j - pair->m0)];
        if (!pair->family.strictly_inside(b0)) return false;
        *out = static_cast<double>(n) * pair->family.kl(b1, b0);
        return true;
    }
};

// One replication's evolving evidence: both marginals (inside the switch
// state) plus running sufficient sums for the penalized-likelihood criteria.
struct StreamEval {
    const ModelSetup* setup;
    SwitchState sw;
    LrEval lr;
    double s0 = 0.0, s1 = 0.0;

    explicit StreamEval(const ModelSetup& st)
        : setup(&st), sw(st.proto_m0, st.proto_m1, st.prior), lr(st.pair) {}

    void feed(double x) {
        sw.update(x);
        if (setup->fam_code == 3) {
            s0 += x * x;
            s1 += x;
        } else {
            s0 += x;
        }
    }
    std::int64_t n() const { return sw.n(); }
};

// Decision at the current prefix; MLE failures select the simple model and
// are counted by the caller through *undefined.
Decision eval_decision(StreamEval& ev, SimCriterion c, const SimConfig& cfg, bool* undefined) {
    Decision d;
    d.n = ev.n();
    switch (c) {
        case SimCriterion::Switch:
            return switch_select(ev.sw, cfg.gamma);
        case SimCriterion::Bayes:
            return bfms_select(ev.sw.marginal0(), ev.sw.marginal1());
        case SimCriterion::Always0:
            d.selected = 0;
            d.evidence = 1.0;
            return d;
        case SimCriterion::Always1:
            d.selected = 1;
            d.evidence = 0.0;
            d.log_evidence = kNegInf;
            return d;
        default:
            break;
    }
    double lr = 0.0;
    if (!ev.lr.log_lr(ev.s0, ev.s1, ev.n(), &lr)) {
        if (undefined) *undefined = true;
        d.selected = 0;
        d.evidence = 0.0;
        return d;
    }
    double nd = static_cast<double>(ev.n());
    switch (c) {
        case SimCriterion::AIC:
            d.log_evidence = lr - static_cast<double>(ev.setup->pair.dim_gap());
            d.selected = d.log_evidence > -std::log(cfg.aic_t) ? 1 : 0;
            break;
        case SimCriterion::BIC:
            d.log_evidence = lr - 0.5 * static_cast<double>(ev.setup->pair.dim_gap()) * std::log(nd);
            d.selected = d.log_evidence > 0.0 ? 1 : 0;
            break;
        case SimCriterion::HQ:
            if (ev.n() < 3) throw NTooSmall();
            d.log_evidence = lr - cfg.hq_c * std::log(std::log(nd));
            d.selected = d.log_evidence >= 0.0 ? 1 : 0;
            break;
        default:
            throw Error("unreachable criterion");
    }
    d.evidence = d.log_evidence;
    return d;
}

// Estimators from running sufficient sums (same arithmetic as
// criteria.cpp's estimate(), which scans the sample).
struct EstEval {
    const FamilySpec* family;
    EstimatorSpec spec;
    EstimatorSpec fallback;
    Vec anchor;
    Vec fb_anchor;
    Vec buf;

    EstEval(const FamilySpec& fam, const EstimatorSpec& e, const EstimatorSpec& fb)
        : family(&fam), spec(e), fallback(fb), buf(static_cast<std::size_t>(fam.dim)) {
        anchor = resolve_anchor(e);
        fb_anchor = resolve_anchor(fb);
    }

    Vec resolve_anchor(const EstimatorSpec& e) const {
        if (!e.anchor.empty()) return e.anchor;
        if (family->name == "bernoulli") return {0.5};
        if (family->name == "poisson") return {1.0};
        if (family->name == "gaussian_meanvar") return {2.0, 0.0};
        return {0.0};
    }

    bool apply_one(const EstimatorSpec& e, const Vec& a, double s0, double s1, std::int64_t n,
                   MeanParam* out) {
        const double nd = static_cast<double>(n);
        switch (e.kind) {
            case EstimatorSpec::Kind::MLE: {
                buf[0] = s0 / nd;
                if (family->dim > 1) buf[1] = s1 / nd;
                if (!family->strictly_inside(buf)) return false;
                *out = MeanParam{buf, true};
                return true;
            }
            case EstimatorSpec::Kind::MAP: {
                double denom = nd + e.lambda0;
                buf[0] = (s0 + e.lambda0 * a[0]) / denom;
                if (family->dim > 1) buf[1] = (s1 + e.lambda0 * a[1]) / denom;
                *out = family->mean_param(buf);
                return true;
            }
            case EstimatorSpec::Kind::TruncatedMLE: {
                auto box = e.box_schedule(n);
                buf[0] = std::clamp(s0 / nd, box[0].lo, box[0].hi);
                if (family->dim > 1) buf[1] = std::clamp(s1 / nd, box[1].lo, box[1].hi);
                *out = family->mean_param(buf);
                return true;
            }
        }
        return false;
    }

    // Estimate with fallback; sets *undefined when the primary MLE failed.
    MeanParam operator()(double s0, double s1, std::int64_t n, bool* undefined) {
        MeanParam out;
        if (apply_one(spec, anchor, s0, s1, n, &out)) return out;
        if (undefined) *undefined = true;
        if (apply_one(fallback, fb_anchor, s0, s1, n, &out)) return out;
        throw UndefinedMLE("fallback estimator also failed");
    }
};

struct MuColumns {
    std::vector<std::string> names;
    static MuColumns for_family(const FamilySpec& fam) {
        MuColumns m;
        if (fam.dim == 1) {
            m.names = {"mu"};
        } else {
            m.names = {"mu1", "mu2"};
        }
        return m;
    }
};

std::vector<Vec> risk_grid(const SimConfig& cfg, const ModelSetup& setup, std::int64_t n) {
    const FamilySpec& fam = setup.pair.family;
    double llg = std::log(std::log(static_cast<double>(n)));
    double w = std::sqrt(cfg.shell_mult * llg / static_cast<double>(n));
    std::vector<double> deltas;
    for (int i = 0; i < cfg.shell_points; ++i)
        deltas.push_back(-w + 2.0 * w * static_cast<double>(i) / static_cast<double>(cfg.shell_points - 1));
    for (double f : cfg.far_offsets) deltas.push_back(f);

    std::vector<Vec> out;
    if (fam.dim == 1) {
        double base = cfg.fixed_tail[0];
        for (double d : deltas) {
            Vec mu{base + d};
            if (fam.strictly_inside(mu)) out.push_back(std::move(mu));
        }
    } else {
        // Perturb the pinned mean coordinate at a fixed second-moment level.
        double base_mu1 = 2.0;
        double base_mu2 = cfg.fixed_tail.back();
        for (double d : deltas) {
            Vec mu{base_mu1, base_mu2 + d};
            if (fam.strictly_inside(mu)) out.push_back(std::move(mu));
        }
    }
    return out;
}

struct Welford {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t count = 0;
    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++count;
    }
    double mean() const { return sum / static_cast<double>(count); }
    double se() const {
        if (count < 2) return 0.0;
        double m = mean();
        double var = (sumsq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(count));
    }
};

std::vector<std::pair<std::int64_t, std::int64_t>> rep_blocks(std::int64_t reps) {
    std::int64_t nb = std::min<std::int64_t>(kRepBlocks, reps);
    std::vector<std::pair<std::int64_t, std::int64_t>> blocks;
    for (std::int64_t b = 0; b < nb; ++b) {
        std::int64_t lo = reps * b / nb, hi = reps * (b + 1) / nb;
        if (lo < hi) blocks.emplace_back(lo, hi);
    }
    return blocks;
}

void require_cfg(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

std::string fmt17(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

StoppingRule StoppingRule::parse(const std::string& name, std::int64_t fixed_n, std::int64_t peek_every) {
    StoppingRule r;
    if (name == "first_crossing") {
        r.kind = Kind::FirstCrossing;
    } else if (name == "max_horizon") {
        r.kind = Kind::MaxHorizon;
    } else if (name == "fixed_n") {
        r.kind = Kind::FixedN;
        require_cfg(fixed_n > 0, "fixed_n rule needs rule_fixed_n > 0");
        r.fixed_n = fixed_n;
    } else if (name == "data_peek") {
        r.kind = Kind::DataPeek;
        require_cfg(peek_every >= 1, "data_peek rule needs peek_every >= 1");
        r.peek_every = peek_every;
    } else {
        throw ConfigError("unknown rule '" + name + "' (expected first_crossing|max_horizon|fixed_n|data_peek)");
    }
    return r;
}

std::string StoppingRule::name() const {
    switch (kind) {
        case Kind::FixedN: return "fixed_n";
        case Kind::FirstCrossing: return "first_crossing";
        case Kind::MaxHorizon: return "max_horizon";
        case Kind::DataPeek: return "data_peek";
    }
    return "?";
}

ModelSetup make_setup(const SimConfig& cfg) {
    FamilySpec fam = family_by_name(cfg.family, cfg.sigma);
    NestedPair pair(fam, cfg.m0, cfg.fixed_tail);

    MarginalState m0 = [&] {
        if (cfg.m0 == 0) return MarginalState::point(pair.family, pair.null_point());
        if (fam.name == "gaussian_meanvar" && cfg.m0 == 1)
            return MarginalState::gamma_precision(cfg.gamma_shape, cfg.gamma_rate, cfg.fixed_tail[0]);
        throw ConfigError("composite M0 is only built in for the mean-variance family");
    }();
    MarginalState m1 = [&] {
        if (fam.name == "gaussian_location") return MarginalState::normal_mean(cfg.sigma, cfg.prior_mean, cfg.prior_var);
        if (fam.name == "bernoulli") return MarginalState::beta_bernoulli(cfg.beta_a, cfg.beta_b);
        if (fam.name == "poisson") return MarginalState::gamma_poisson(cfg.gamma_shape, cfg.gamma_rate);
        return MarginalState::normal_inverse_gamma(cfg.nig_m, cfg.nig_kappa, cfg.nig_a, cfg.nig_b);
    }();

    ModelSetup s{std::move(pair), std::move(m0), std::move(m1), SwitchPrior(cfg.switch_kappa), 0, cfg.sigma};
    if (fam.name == "bernoulli") s.fam_code = 1;
    else if (fam.name == "poisson") s.fam_code = 2;
    else if (fam.name == "gaussian_meanvar") s.fam_code = 3;
    return s;
}

double draw_observation(CounterRng& rng, const ModelSetup& setup, const Vec& mu) {
    switch (setup.fam_code) {
        case 1: return rng.next_bernoulli(mu[0]) ? 1.0 : 0.0;
        case 2: return static_cast<double>(rng.next_poisson(mu[0]));
        case 3: {
            double m = mu.at(1);
            return rng.next_normal(m, std::sqrt(mu[0] - m * m));
        }
        default: return rng.next_normal(mu[0], setup.sigma);
    }
}

// ---- risk -------------------------------------------------------------------

Report simulate_risk(const SimConfig& cfg) {
    ModelSetup setup = make_setup(cfg);
    require_cfg(!cfg.criteria.empty(), "risk needs a criterion");
    SimCriterion crit = sim_criterion_by_name(cfg.criteria[0]);
    LossKind lk = loss_by_name(cfg.loss);
    EstimatorSpec est = estimator_by_name(cfg.estimator, setup.pair.family);
    est.lambda0 = cfg.lambda0;
    EstimatorSpec fb = estimator_by_name(cfg.fallback, setup.pair.family);
    fb.lambda0 = cfg.lambda0;

    struct Cell {
        std::int64_t n;
        Vec mu;
        Welford loss_acc;
        std::int64_t undef = 0;
    };
    std::vector<Cell> cells;
    for (std::int64_t n : cfg.n_grid) {
        require_cfg(n >= 3, "risk n grid needs n >= 3");
        for (Vec& mu : risk_grid(cfg, setup, n)) cells.push_back(Cell{n, std::move(mu), {}, 0});
    }

    parallel_jobs(cfg.workers, static_cast<std::int64_t>(cells.size()), [&](std::int64_t ci) {
        Cell& cell = cells[static_cast<std::size_t>(ci)];
        MeanParam truth = setup.pair.family.mean_param(cell.mu);
        EstEval est1(setup.pair.family, est, fb);
        EstEval est0(setup.pair.family, est, fb);
        for (std::int64_t rep = 0; rep < cfg.reps; ++rep) {
            CounterRng rng(cfg.seed, stream_id(static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(rep)));
            StreamEval ev(setup);
            for (std::int64_t i = 0; i < cell.n; ++i) ev.feed(draw_observation(rng, setup, cell.mu));
            bool undef = false;
            Decision d = eval_decision(ev, crit, cfg, &undef);
            MeanParam mh = (d.selected == 0)
                               ? project0(est0(ev.s0, ev.s1, cell.n, &undef), setup.pair)
                               : est1(ev.s0, ev.s1, cell.n, &undef);
            cell.loss_acc.add(loss(lk, truth, mh, setup.pair.family));
            if (undef) ++cell.undef;
        }
    });

    Report rep;
    MuColumns mc = MuColumns::for_family(setup.pair.family);
    rep.columns = {"n"};
    for (auto& c : mc.names) rep.columns.push_back(c);
    for (auto c : {"R_hat", "se", "ratio_loglog", "ratio_log", "reps", "undefined_mle_count"})
        rep.columns.push_back(c);
    for (const Cell& cell : cells) {
        double nd = static_cast<double>(cell.n);
        double rhat = cell.loss_acc.mean();
        std::vector<std::string> row{std::to_string(cell.n)};
        for (double v : cell.mu) row.push_back(fmt17(v));
        row.push_back(fmt17(rhat));
        row.push_back(fmt17(cell.loss_acc.se()));
        row.push_back(fmt17(nd * rhat / std::log(std::log(nd))));
        row.push_back(fmt17(nd * rhat / std::log(nd)));
        row.push_back(std::to_string(cfg.reps));
        row.push_back(std::to_string(cell.undef));
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

// ---- risk decomposition ------------------------------------------------------

Report risk_decomposition_check(const SimConfig& cfg) {
    ModelSetup setup = make_setup(cfg);
    require_cfg(cfg.loss == "sq", "decomposition check is stated for squared error loss");
    SimCriterion crit = sim_criterion_by_name(cfg.criteria.empty() ? "switch" : cfg.criteria[0]);
    EstimatorSpec est = estimator_by_name(cfg.estimator, setup.pair.family);
    EstimatorSpec fb = estimator_by_name(cfg.fallback, setup.pair.family);

    struct Cell {
        std::int64_t n;
        Vec mu;
        Welford delta, est1_only;
        std::int64_t simple = 0, undef = 0;
    };
    std::vector<Cell> cells;
    std::vector<Vec> truths;
    if (setup.pair.family.dim == 1) {
        truths.push_back(Vec{cfg.fixed_tail[0]});
        truths.push_back(Vec{cfg.fixed_tail[0] + cfg.decomp_offset});
    } else {
        truths.push_back(Vec{2.0, cfg.fixed_tail.back()});
        truths.push_back(Vec{2.0, cfg.fixed_tail.back() + cfg.decomp_offset});
    }
    for (std::int64_t n : cfg.n_grid)
        for (const Vec& mu : truths) cells.push_back(Cell{n, mu, {}, {}, 0, 0});

    parallel_jobs(cfg.workers, static_cast<std::int64_t>(cells.size()), [&](std::int64_t ci) {
        Cell& cell = cells[static_cast<std::size_t>(ci)];
        MeanParam truth = setup.pair.family.mean_param(cell.mu);
        EstEval e1(setup.pair.family, est, fb);
        for (std::int64_t r = 0; r < cfg.reps; ++r) {
            CounterRng rng(cfg.seed, stream_id(static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(r)));
            StreamEval ev(setup);
            for (std::int64_t i = 0; i < cell.n; ++i) ev.feed(draw_observation(rng, setup, cell.mu));
            bool undef = false;
            Decision d = eval_decision(ev, crit, cfg, &undef);
            MeanParam m1 = e1(ev.s0, ev.s1, cell.n, &undef);
            double l1 = loss(LossKind::SquaredError, truth, m1, setup.pair.family);
            cell.est1_only.add(l1);
            if (d.selected == 0) {
                ++cell.simple;
                MeanParam m0 = project0(m1, setup.pair);
                cell.delta.add(loss(LossKind::SquaredError, truth, m0, setup.pair.family));
            } else {
                cell.delta.add(l1);
            }
            if (undef) ++cell.undef;
        }
    });

    Report rep;
    MuColumns mc = MuColumns::for_family(setup.pair.family);
    rep.columns = {"n"};
    for (auto& c : mc.names) rep.columns.push_back(c);
    for (auto c : {"R_delta", "se_delta", "R_est1", "se_est1", "p_simple", "se_p", "dist_sq", "bound",
                   "pass", "reps", "undefined_mle_count"})
        rep.columns.push_back(c);
    for (const Cell& cell : cells) {
        MeanParam truth = setup.pair.family.mean_param(cell.mu);
        MeanParam proj = project0(truth, setup.pair);
        double dist2 = loss(LossKind::SquaredError, truth, proj, setup.pair.family);
        double p = static_cast<double>(cell.simple) / static_cast<double>(cfg.reps);
        double se_p = binomial_se(p, static_cast<double>(cfg.reps));
        double se_comb = std::sqrt(cell.delta.se() * cell.delta.se() +
                                   4.0 * cell.est1_only.se() * cell.est1_only.se() +
                                   dist2 * dist2 * se_p * se_p);
        double bound = 2.0 * cell.est1_only.mean() + p * dist2 + 5.0 * se_comb;
        bool pass = cell.delta.mean() <= bound;
        std::vector<std::string> row{std::to_string(cell.n)};
        for (double v : cell.mu) row.push_back(fmt17(v));
        row.push_back(fmt17(cell.delta.mean()));
        row.push_back(fmt17(cell.delta.se()));
        row.push_back(fmt17(cell.est1_only.mean()));
        row.push_back(fmt17(cell.est1_only.se()));
        row.push_back(fmt17(p));
        row.push_back(fmt17(se_p));
        row.push_back(fmt17(dist2));
        row.push_back(fmt17(bound));
        row.push_back(pass ? "1" : "0");
        row.push_back(std::to_string(cfg.reps));
        row.push_back(std::to_string(cell.undef));
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

// ---- stopping ---------------------------------------------------------------

Report simulate_stopping(const SimConfig& cfg) {
    ModelSetup setup = make_setup(cfg);
    require_cfg(setup.pair.singleton(), "stopping simulation needs a singleton M0");
    StoppingRule rule = StoppingRule::parse(cfg.rule, cfg.rule_fixed_n, cfg.peek_every);

    std::vector<SimCriterion> crits;
    for (const std::string& c : cfg.criteria) {
        SimCriterion sc = sim_criterion_by_name(c);
        require_cfg(sc == SimCriterion::Switch || sc == SimCriterion::Bayes || sc == SimCriterion::AIC,
                    "stopping supports switch, bayes, and the aic negative demonstration");
        crits.push_back(sc);
    }
    const std::size_t nc = crits.size(), na = cfg.alphas.size();
    const Vec null_mu = cfg.fixed_tail;

    // AIC rejection thresholds per alpha (GLRT calibration, exact level).
    std::vector<double> aic_cut(na);
    for (std::size_t a = 0; a < na; ++a) aic_cut[a] = -std::log(aic_glrt_threshold(cfg.alphas[a]));

    auto blocks = rep_blocks(cfg.reps);
    std::vector<std::vector<std::int64_t>> counts(blocks.size(),
                                                  std::vector<std::int64_t>(nc * na, 0));

    parallel_jobs(cfg.workers, static_cast<std::int64_t>(blocks.size()), [&](std::int64_t bi) {
        auto [lo, hi] = blocks[static_cast<std::size_t>(bi)];
        auto& cnt = counts[static_cast<std::size_t>(bi)];
        for (std::int64_t rep = lo; rep < hi; ++rep) {
            CounterRng rng(cfg.seed, stream_id(0, static_cast<std::uint64_t>(rep)));
            StreamEval ev(setup);
            double min_sw = 0.0, min_bf = 0.0;  // log r at n=0 is 0
            double max_aic = kNegInf;
            for (std::int64_t n = 1; n <= cfg.horizon; ++n) {
                ev.feed(draw_observation(rng, setup, null_mu));
                if (!rule.checks_at(n)) continue;
                for (std::size_t c = 0; c < nc; ++c) {
                    switch (crits[c]) {
                        case SimCriterion::Switch:
                            min_sw = std::min(min_sw, ev.sw.log_r_sw());
                            break;
                        case SimCriterion::Bayes:
                            min_bf = std::min(min_bf, ev.sw.log_pb0() - ev.sw.log_pb1());
                            break;
                        default: {
                            double lr;
                            if (ev.lr.log_lr(ev.s0, ev.s1, n, &lr))
                                max_aic = std::max(max_aic, lr - static_cast<double>(setup.pair.dim_gap()));
                            break;
                        }
                    }
                }
            }
            for (std::size_t c = 0; c < nc; ++c) {
                for (std::size_t a = 0; a < na; ++a) {
                    bool rejected = false;
                    double log_alpha = std::log(cfg.alphas[a]);
                    if (crits[c] == SimCriterion::Switch) rejected = min_sw <= log_alpha;
                    else if (crits[c] == SimCriterion::Bayes) rejected = min_bf <= log_alpha;
                    else rejected = max_aic > aic_cut[a];
                    if (rejected) ++cnt[c * na + a];
                }
            }
        }
    });

    Report rep;
    rep.columns = {"criterion", "alpha", "rule", "horizon", "rejections", "reps", "frequency", "se"};
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t a = 0; a < na; ++a) {
            std::int64_t total = 0;
            for (auto& cnt : counts) total += cnt[c * na + a];
            double freq = static_cast<double>(total) / static_cast<double>(cfg.reps);
            rep.rows.push_back({cfg.criteria[c], fmt17(cfg.alphas[a]), rule.name(),
                                std::to_string(cfg.horizon), std::to_string(total), std::to_string(cfg.reps),
                                fmt17(freq), fmt17(binomial_se(freq, static_cast<double>(cfg.reps)))});
        }
    }
    return rep;
}

// ---- law-of-the-iterated-logarithm demonstration ----------------------------

Report lil_failure_demo(const SimConfig& cfg) {
    ModelSetup setup = make_setup(cfg);
    require_cfg(setup.pair.singleton(), "lil demo needs a singleton M0");
    require_cfg(!cfg.horizons.empty(), "lil demo needs horizons");
    const Vec null_mu = cfg.fixed_tail;
    const std::int64_t max_h = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
    const std::int64_t fixed_n = cfg.rule_fixed_n > 0 ? cfg.rule_fixed_n : 100;
    const std::size_t nh = cfg.horizons.size(), na = cfg.alphas.size();
    const double gap = static_cast<double>(setup.pair.dim_gap());

    auto blocks = rep_blocks(cfg.reps);
    // per block: aic ever counts per horizon, hq ever counts per horizon,
    // fixed-n rejections per alpha for the two calibrations.
    struct BlockCnt {
        std::vector<std::int64_t> aic_ever, hq_ever, glrt, zcal;
    };
    std::vector<BlockCnt> counts(blocks.size());
    for (auto& b : counts) {
        b.aic_ever.assign(nh, 0);
        b.hq_ever.assign(nh, 0);
        b.glrt.assign(na, 0);
        b.zcal.assign(na, 0);
    }
    std::vector<double> glrt_cut(na), zcal_cut(na);
    for (std::size_t a = 0; a < na; ++a) {
        glrt_cut[a] = -std::log(aic_glrt_threshold(cfg.alphas[a]));
        zcal_cut[a] = -std::log(aic_threshold_from_z(cfg.alphas[a]));
    }

    parallel_jobs(cfg.workers, static_cast<std::int64_t>(blocks.size()), [&](std::int64_t bi) {
        auto [lo, hi] = blocks[static_cast<std::size_t>(bi)];
        BlockCnt& cnt = counts[static_cast<std::size_t>(bi)];
        for (std::int64_t rep = lo; rep < hi; ++rep) {
            CounterRng rng(cfg.seed, stream_id(0, static_cast<std::uint64_t>(rep)));
            LrEval lr(setup.pair);
            double s0 = 0.0, s1 = 0.0;
            std::int64_t first_aic = -1, first_hq = -1;
            double fixed_evidence = kNegInf;
            for (std::int64_t n = 1; n <= max_h; ++n) {
                double x = draw_observation(rng, setup, null_mu);
                if (setup.fam_code == 3) {
                    s0 += x * x;
                    s1 += x;
                } else {
                    s0 += x;
                }
                double v;
                if (!lr.log_lr(s0, s1, n, &v)) continue;
                if (first_aic < 0 && v - gap > 0.0) first_aic = n;
                if (n >= 3 && first_hq < 0 && v - cfg.lil_hq_c * std::log(std::log(static_cast<double>(n))) >= 0.0)
                    first_hq = n;
                if (n == fixed_n) fixed_evidence = v - gap;
            }
            for (std::size_t h = 0; h < nh; ++h) {
                if (first_aic > 0 && first_aic <= cfg.horizons[h]) ++cnt.aic_ever[h];
                if (first_hq > 0 && first_hq <= cfg.horizons[h]) ++cnt.hq_ever[h];
            }
            for (std::size_t a = 0; a < na; ++a) {
                if (fixed_evidence > glrt_cut[a]) ++cnt.glrt[a];
                if (fixed_evidence > zcal_cut[a]) ++cnt.zcal[a];
            }
        }
    });

    Report rep;
    rep.columns = {"series", "horizon", "alpha", "frequency", "se", "reps"};
    auto emit = [&](const std::string& series, std::int64_t horizon, double alpha, std::int64_t total) {
        double f = static_cast<double>(total) / static_cast<double>(cfg.reps);
        rep.rows.push_back({series, std::to_string(horizon), alpha < 0 ? "" : fmt17(alpha), fmt17(f),
                            fmt17(binomial_se(f, static_cast<double>(cfg.reps))), std::to_string(cfg.reps)});
    };
    for (std::size_t h = 0; h < nh; ++h) {
        std::int64_t t = 0;
        for (auto& b : counts) t += b.aic_ever[h];
        emit("aic_ever_select1", cfg.horizons[h], -1.0, t);
    }
    for (std::size_t h = 0; h < nh; ++h) {
        std::int64_t t = 0;
        for (auto& b : counts) t += b.hq_ever[h];
        emit("hq_ever_select1", cfg.horizons[h], -1.0, t);
    }
    for (std::size_t a = 0; a < na; ++a) {
        std::int64_t t = 0;
        for (auto& b : counts) t += b.glrt[a];
        emit("aic_fixed_n_glrt", fixed_n, cfg.alphas[a], t);
    }
    for (std::size_t a = 0; a < na; ++a) {
        std::int64_t t = 0;
        for (auto& b : counts) t += b.zcal[a];
        emit("aic_fixed_n_zcal", fixed_n, cfg.alphas[a], t);
    }
    return rep;
}

// ---- power ------------------------------------------------------------------

Report simulate_power(const SimConfig& cfg) {
    ModelSetup setup = make_setup(cfg);
    require_cfg(setup.pair.singleton(), "power sweep needs a singleton M0");
    require_cfg(setup.pair.family.dim == 1, "power sweep is built for one-dimensional families");
    require_cfg(cfg.n_grid.size() >= 1, "power sweep needs n");

    struct CellKey {
        std::int64_t n;
        std::size_t shell;
        double s;
        double mu;
    };
    std::vector<CellKey> keys;
    for (std::int64_t n : cfg.n_grid) {
        double nd = static_cast<double>(n);
        for (std::size_t sh = 0; sh < cfg.shells.size(); ++sh) {
            double scale = cfg.shells[sh] == "log" ? std::log(nd) : std::log(std::log(nd));
            require_cfg(cfg.shells[sh] == "log" || cfg.shells[sh] == "loglog", "shells are loglog|log");
            for (double s : cfg.s_grid) {
                double mu = cfg.fixed_tail[0] + std::sqrt(s * scale / nd);
                if (!setup.pair.family.strictly_inside(Vec{mu})) continue;
                keys.push_back(CellKey{n, sh, s, mu});
            }
        }
    }

    const std::size_t na = cfg.alphas.size();
    struct CellOut {
        std::vector<std::int64_t> rej_sw, rej_bf, diff_sum, diff_abs;
    };
    std::vector<CellOut> outs(keys.size());

    parallel_jobs(cfg.workers, static_cast<std::int64_t>(keys.size()), [&](std::int64_t ci) {
        const CellKey& k = keys[static_cast<std::size_t>(ci)];
        CellOut& o = outs[static_cast<std::size_t>(ci)];
        o.rej_sw.assign(na, 0);
        o.rej_bf.assign(na, 0);
        o.diff_sum.assign(na, 0);
        o.diff_abs.assign(na, 0);
        Vec mu{k.mu};
        for (std::int64_t rep = 0; rep < cfg.reps; ++rep) {
            // Streams are keyed by the shell only, so every s reuses the same
            // underlying noise (shared random numbers across the sweep).
            CounterRng rng(cfg.seed, stream_id(k.shell, static_cast<std::uint64_t>(rep)));
            StreamEval ev(setup);
            for (std::int64_t i = 0; i < k.n; ++i) ev.feed(draw_observation(rng, setup, mu));
            double lsw = ev.sw.log_r_sw();
            double lbf = ev.sw.log_pb0() - ev.sw.log_pb1();
            for (std::size_t a = 0; a < na; ++a) {
                double cut = std::log(cfg.alphas[a]);
                int rs = lsw <= cut ? 1 : 0;
                int rb = lbf <= cut ? 1 : 0;
                o.rej_sw[a] += rs;
                o.rej_bf[a] += rb;
                o.diff_sum[a] += rs - rb;
                o.diff_abs[a] += (rs - rb) * (rs - rb);
            }
        }
    });

    Report rep;
    rep.columns = {"n",        "shell",    "s",        "mu",      "f_n",  "alpha",   "reps",
                   "power_switch", "se_switch", "power_bayes", "se_bayes", "diff", "se_diff"};
    for (std::size_t ci = 0; ci < keys.size(); ++ci) {
        const CellKey& k = keys[ci];
        const CellOut& o = outs[ci];
        double nd = static_cast<double>(k.n);
        double reps = static_cast<double>(cfg.reps);
        double d2 = (k.mu - cfg.fixed_tail[0]) * (k.mu - cfg.fixed_tail[0]);
        double fn = nd * d2 / std::log(std::log(nd));
        for (std::size_t a = 0; a < na; ++a) {
            double psw = static_cast<double>(o.rej_sw[a]) / reps;
            double pbf = static_cast<double>(o.rej_bf[a]) / reps;
            double dmean = static_cast<double>(o.diff_sum[a]) / reps;
            double dvar = static_cast<double>(o.diff_abs[a]) / reps - dmean * dmean;
            rep.rows.push_back({std::to_string(k.n), cfg.shells[k.shell], fmt17(k.s), fmt17(k.mu),
                                fmt17(fn), fmt17(cfg.alphas[a]), std::to_string(cfg.reps), fmt17(psw),
                                fmt17(binomial_se(psw, reps)), fmt17(pbf), fmt17(binomial_se(pbf, reps)),
                                fmt17(dmean), fmt17(std::sqrt(std::max(dvar, 0.0) / reps))});
        }
    }
    return rep;
}

// ---- consistency ------------------------------------------------------------

Report consistency_trace(const SimConfig& cfg) {
    ModelSetup setup = make_setup(cfg);
    SimCriterion crit = sim_criterion_by_name(cfg.criteria.empty() ? "switch" : cfg.criteria[0]);

    struct Cell {
        std::int64_t n;
        std::string truth;
        Vec mu;
        std::int64_t select1 = 0, undef = 0;
    };
    std::vector<Cell> cells;
    for (std::int64_t n : cfg.n_grid) {
        if (setup.pair.family.dim == 1) {
            cells.push_back(Cell{n, "null", Vec{cfg.fixed_tail[0]}, 0, 0});
            cells.push_back(Cell{n, "alt", Vec{cfg.fixed_tail[0] + cfg.alt_offset}, 0, 0});
        } else {
            cells.push_back(Cell{n, "null", Vec{2.0, cfg.fixed_tail.back()}, 0, 0});
            cells.push_back(Cell{n, "alt", Vec{2.0, cfg.fixed_tail.back() + cfg.alt_offset}, 0, 0});
        }
    }

    parallel_jobs(cfg.workers, static_cast<std::int64_t>(cells.size()), [&](std::int64_t ci) {
        Cell& cell = cells[static_cast<std::size_t>(ci)];
        for (std::int64_t rep = 0; rep < cfg.reps; ++rep) {
            CounterRng rng(cfg.seed, stream_id(static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(rep)));
            StreamEval ev(setup);
            for (std::int64_t i = 0; i < cell.n; ++i) ev.feed(draw_observation(rng, setup, cell.mu));
            bool undef = false;
            Decision d = eval_decision(ev, crit, cfg, &undef);
            if (d.selected == 1) ++cell.select1;
            if (undef) ++cell.undef;
        }
    });

    Report rep;
    MuColumns mc = MuColumns::for_family(setup.pair.family);
    rep.columns = {"n", "truth"};
    for (auto& c : mc.names) rep.columns.push_back(c);
    for (auto c : {"p_select0", "p_select1", "se", "reps", "undefined_mle_count"}) rep.columns.push_back(c);
    for (const Cell& cell : cells) {
        double p1 = static_cast<double>(cell.select1) / static_cast<double>(cfg.reps);
        std::vector<std::string> row{std::to_string(cell.n), cell.truth};
        for (double v : cell.mu) row.push_back(fmt17(v));
        row.push_back(fmt17(1.0 - p1));
        row.push_back(fmt17(p1));
        row.push_back(fmt17(binomial_se(p1, static_cast<double>(cfg.reps))));
        row.push_back(std::to_string(cfg.reps));
        row.push_back(std::to_string(cell.undef));
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

Report run_simulation(const SimConfig& cfg) {
    require_cfg(cfg.reps >= 1, "reps must be at least 1");
    require_cfg(cfg.shell_points >= 2, "shell_points must be at least 2");
    if (cfg.kind == "risk") return simulate_risk(cfg);
    if (cfg.kind == "stopping") return simulate_stopping(cfg);
    if (cfg.kind == "power") return simulate_power(cfg);
    if (cfg.kind == "lil") return lil_failure_demo(cfg);
    if (cfg.kind == "consistency") return consistency_trace(cfg);
    if (cfg.kind == "decomposition") return risk_decomposition_check(cfg);
    throw ConfigError("unknown simulation kind '" + cfg.kind +
                      "' (expected risk|stopping|power|lil|consistency|decomposition)");
}

// ---- configuration ----------------------------------------------------------

namespace {

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : v) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw ConfigError("bad numeric value for '" + key + "': " + v);
    }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw ConfigError("bad integer value for '" + key + "': " + v);
    }
}

std::vector<double> parse_dlist(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (auto& s : split_list(v)) out.push_back(parse_double(key, s));
    return out;
}

std::vector<std::int64_t> parse_ilist(const std::string& key, const std::string& v) {
    std::vector<std::int64_t> out;
    for (auto& s : split_list(v)) out.push_back(parse_int(key, s));
    return out;
}

std::string join_d(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt17(v[i]);
    return s;
}

std::string join_i(const std::vector<std::int64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string join_s(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

void apply_kind_defaults(SimConfig& cfg) {
    if (cfg.kind == "stopping" || cfg.kind == "lil" || cfg.kind == "power") cfg.reps = 10000;
    if (cfg.kind == "power") cfg.n_grid = {4096};
    if (cfg.kind == "stopping") cfg.criteria = {"switch", "bayes"};
    if (cfg.kind == "consistency") cfg.n_grid = {128, 512, 1024, 2048};
    if (cfg.kind == "decomposition") {
        cfg.n_grid = {128};
        cfg.reps = 4000;
    }
}

}  // namespace

void apply_config_line(SimConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "kind") cfg.kind = value;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "reps") cfg.reps = parse_int(key, value);
    else if (key == "n_grid") cfg.n_grid = parse_ilist(key, value);
    else if (key == "workers") cfg.workers = static_cast<int>(parse_int(key, value));
    else if (key == "family") cfg.family = value;
    else if (key == "sigma") cfg.sigma = parse_double(key, value);
    else if (key == "m0") cfg.m0 = static_cast<int>(parse_int(key, value));
    else if (key == "fixed_tail") cfg.fixed_tail = parse_dlist(key, value);
    else if (key == "prior_mean") cfg.prior_mean = parse_double(key, value);
    else if (key == "prior_var") cfg.prior_var = parse_double(key, value);
    else if (key == "beta_a") cfg.beta_a = parse_double(key, value);
    else if (key == "beta_b") cfg.beta_b = parse_double(key, value);
    else if (key == "gamma_shape") cfg.gamma_shape = parse_double(key, value);
    else if (key == "gamma_rate") cfg.gamma_rate = parse_double(key, value);
    else if (key == "nig_m") cfg.nig_m = parse_double(key, value);
    else if (key == "nig_kappa") cfg.nig_kappa = parse_double(key, value);
    else if (key == "nig_a") cfg.nig_a = parse_double(key, value);
    else if (key == "nig_b") cfg.nig_b = parse_double(key, value);
    else if (key == "criterion") cfg.criteria = split_list(value);
    else if (key == "gamma") cfg.gamma = parse_double(key, value);
    else if (key == "aic_t") cfg.aic_t = parse_double(key, value);
    else if (key == "hq_c") cfg.hq_c = parse_double(key, value);
    else if (key == "lil_hq_c") cfg.lil_hq_c = parse_double(key, value);
    else if (key == "switch_kappa") cfg.switch_kappa = parse_double(key, value);
    else if (key == "estimator") cfg.estimator = value;
    else if (key == "fallback") cfg.fallback = value;
    else if (key == "lambda0") cfg.lambda0 = parse_double(key, value);
    else if (key == "loss") cfg.loss = value;
    else if (key == "alphas") cfg.alphas = parse_dlist(key, value);
    else if (key == "horizon") cfg.horizon = parse_int(key, value);
    else if (key == "horizons") cfg.horizons = parse_ilist(key, value);
    else if (key == "rule") cfg.rule = value;
    else if (key == "rule_fixed_n") cfg.rule_fixed_n = parse_int(key, value);
    else if (key == "peek_every") cfg.peek_every = parse_int(key, value);
    else if (key == "shell_mult") cfg.shell_mult = parse_double(key, value);
    else if (key == "shell_points") cfg.shell_points = static_cast<int>(parse_int(key, value));
    else if (key == "far_offsets") cfg.far_offsets = parse_dlist(key, value);
    else if (key == "s_grid") cfg.s_grid = parse_dlist(key, value);
    else if (key == "shells") cfg.shells = split_list(value);
    else if (key == "alt_offset") cfg.alt_offset = parse_double(key, value);
    else if (key == "decomp_offset") cfg.decomp_offset = parse_double(key, value);
    else throw ConfigError("unknown key '" + key + "'");
}

SimConfig parse_sim_config(const std::string& text, const std::string& kind_hint) {
    // First pass to find the kind so kind defaults apply before overrides.
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string key, value;
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '=' &&
               line[i] != ':')
            key.push_back(line[i++]);
        while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) || line[i] == '=' ||
                                   line[i] == ':'))
            ++i;
        value = line.substr(i);
        while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) value.pop_back();
        if (key.empty()) continue;
        if (value.empty()) throw ConfigError("key '" + key + "' has no value");
        entries.emplace_back(key, value);
    }

    SimConfig cfg;
    if (!kind_hint.empty()) cfg.kind = kind_hint;
    for (auto& [k, v] : entries)
        if (k == "kind") cfg.kind = v;
    apply_kind_defaults(cfg);
    for (auto& [k, v] : entries)
        if (k != "kind") apply_config_line(cfg, k, v);
    return cfg;
}

std::map<std::string, std::string> SimConfig::resolved() const {
    std::map<std::string, std::string> m;
    m["kind"] = kind;
    m["seed"] = std::to_string(seed);
    m["reps"] = std::to_string(reps);
    m["n_grid"] = join_i(n_grid);
    m["workers"] = std::to_string(workers);
    m["family"] = family;
    m["sigma"] = fmt17(sigma);
    m["m0"] = std::to_string(m0);
    m["fixed_tail"] = join_d(fixed_tail);
    m["prior_mean"] = fmt17(prior_mean);
    m["prior_var"] = fmt17(prior_var);
    m["beta_a"] = fmt17(beta_a);
    m["beta_b"] = fmt17(beta_b);
    m["gamma_shape"] = fmt17(gamma_shape);
    m["gamma_rate"] = fmt17(gamma_rate);
    m["nig_m"] = fmt17(nig_m);
    m["nig_kappa"] = fmt17(nig_kappa);
    m["nig_a"] = fmt17(nig_a);
    m["nig_b"] = fmt17(nig_b);
    m["criterion"] = join_s(criteria);
    m["gamma"] = fmt17(gamma);
    m["aic_t"] = fmt17(aic_t);
    m["hq_c"] = fmt17(hq_c);
    m["lil_hq_c"] = fmt17(lil_hq_c);
    m["switch_kappa"] = fmt17(switch_kappa);
    m["estimator"] = estimator;
    m["fallback"] = fallback;
    m["lambda0"] = fmt17(lambda0);
    m["loss"] = loss;
    m["alphas"] = join_d(alphas);
    m["horizon"] = std::to_string(horizon);
    m["horizons"] = join_i(horizons);
    m["rule"] = rule;
    m["rule_fixed_n"] = std::to_string(rule_fixed_n);
    m["peek_every"] = std::to_string(peek_every);
    m["shell_mult"] = fmt17(shell_mult);
    m["shell_points"] = std::to_string(shell_points);
    m["far_offsets"] = join_d(far_offsets);
    m["s_grid"] = join_d(s_grid);
    m["shells"] = join_s(shells);
    m["alt_offset"] = fmt17(alt_offset);
    m["decomp_offset"] = fmt17(decomp_offset);
    return m;
}

}  // namespace switchsel
