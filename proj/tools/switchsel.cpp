// switchsel: model selection between two nested exponential families via the
// switch criterion, with Bayes factor / AIC / BIC / Hannan-Quinn baselines,
// an anytime-valid sequential test, and a Monte Carlo simulation harness.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "switchsel/harness.hpp"
#include "switchsel/report_io.hpp"
#include "switchsel/stats.hpp"

using namespace switchsel;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitParse = 2;
constexpr int kExitBadObservation = 3;
constexpr int kExitBadConfig = 4;
constexpr int kExitNotAnytimeValid = 5;

struct CliError {
    int code;
    std::string message;
};

SimConfig load_config(const std::string& path, const std::string& kind_hint = "") {
    try {
        std::string text = path.empty() ? std::string() : read_file(path);
        return parse_sim_config(text, kind_hint);
    } catch (const ConfigError& e) {
        throw CliError{kExitBadConfig, e.what()};
    } catch (const Error& e) {
        throw CliError{kExitBadConfig, e.what()};
    }
}

// One observation per line/row: plain number, leading CSV field, or a
// one-element JSON array.
std::optional<double> parse_observation_line(const std::string& line) {
    std::string s = line;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    s = s.substr(b);
    if (s.empty()) return std::nullopt;
    if (s.front() == '[') {
        auto j = nlohmann::json::parse(s, nullptr, false);
        if (j.is_discarded() || !j.is_array() || j.size() != 1 || !j[0].is_number())
            throw CliError{kExitParse, "bad JSON observation line: " + line};
        return j[0].get<double>();
    }
    if (s.find(',') != std::string::npos)
        throw CliError{kExitParse, "expected one observation per row: " + line};
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw CliError{kExitParse, "bad observation '" + s + "'"};
    }
}

std::vector<double> load_observations(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<double> xs;
    std::string line;
    while (std::getline(in, line)) {
        auto v = parse_observation_line(line);
        if (v) xs.push_back(*v);
    }
    return xs;
}

Manifest make_manifest(const std::string& subcommand, const SimConfig& cfg) {
    Manifest m;
    m.subcommand = subcommand;
    m.kind = cfg.kind;
    m.seed = cfg.seed;
    m.config = cfg.resolved();
    m.start_time = now_iso8601();
    return m;
}

// Evidence at the full sample for one criterion; throws CliError on
// unsupported observations.
Decision decide(const SimConfig& cfg, const ModelSetup& setup, const std::vector<double>& xs,
                bool* undefined_mle) {
    SwitchState sw(setup.proto_m0, setup.proto_m1, setup.prior);
    for (double x : xs) {
        try {
            sw.update(x);
        } catch (const InvalidObservation& e) {
            throw CliError{kExitBadObservation, e.what()};
        }
    }
    const std::string& name = cfg.criteria.empty() ? std::string("switch") : cfg.criteria[0];
    try {
        if (name == "switch") return switch_select(sw, cfg.gamma);
        if (name == "bayes") return bfms_select(sw.marginal0(), sw.marginal1());
        if (name == "aic") return aic_select(xs, setup.pair, cfg.aic_t);
        if (name == "bic") return bic_select(xs, setup.pair);
        if (name == "hq") return hq_select(xs, setup.pair, cfg.hq_c);
    } catch (const UndefinedMLE&) {
        if (undefined_mle) *undefined_mle = true;
        Decision d;
        d.n = static_cast<std::int64_t>(xs.size());
        d.selected = 0;
        d.evidence = 0.0;
        return d;
    } catch (const NTooSmall& e) {
        throw CliError{kExitBadConfig, e.what()};
    }
    throw CliError{kExitBadConfig, "unknown criterion '" + name + "'"};
}

int cmd_select(const SimConfig& cfg, const std::string& data_path) {
    ModelSetup setup = [&] {
        try {
            return make_setup(cfg);
        } catch (const ConfigError& e) {
            throw CliError{kExitBadConfig, e.what()};
        }
    }();
    std::vector<double> xs;
    try {
        xs = load_observations(data_path);
    } catch (const Error& e) {
        throw CliError{kExitParse, e.what()};
    }

    bool undef = false;
    Decision d = decide(cfg, setup, xs, &undef);

    EstimatorSpec est = estimator_by_name(cfg.estimator, setup.pair.family);
    est.lambda0 = cfg.lambda0;
    EstimatorSpec fb = estimator_by_name(cfg.fallback, setup.pair.family);
    fb.lambda0 = cfg.lambda0;
    MeanParam estimate_out;
    try {
        estimate_out = post_selection_estimate(d, xs, setup.pair, est, est);
    } catch (const Error&) {
        undef = true;
        estimate_out = post_selection_estimate(d, xs, setup.pair, fb, fb);
    }

    Manifest man = make_manifest("select", cfg);
    man.end_time = now_iso8601();
    nlohmann::json out;
    out["manifest"] = {{"tool", "switchsel"}, {"version", kToolVersion}, {"subcommand", "select"},
                       {"seed", cfg.seed},   {"start", man.start_time},  {"end", man.end_time},
                       {"config", man.config}};
    out["n"] = d.n;
    out["criterion"] = cfg.criteria.empty() ? "switch" : cfg.criteria[0];
    out["selected"] = d.selected;
    out["evidence"] = fmt17(d.evidence);
    out["log_evidence"] = fmt17(d.log_evidence);
    out["estimate"] = [&] {
        std::vector<std::string> e;
        for (double v : estimate_out.values) e.push_back(fmt17(v));
        return e;
    }();
    out["undefined_mle_fallback"] = undef;
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_test(SimConfig cfg, double alpha, const std::string& criterion) {
    cfg.criteria = {criterion};
    CriterionKind kind;
    try {
        kind = criterion_by_name(criterion);
    } catch (const ConfigError& e) {
        throw CliError{kExitBadConfig, e.what()};
    }
    std::unique_ptr<RobustTest> tester;
    try {
        tester = std::make_unique<RobustTest>(kind, alpha);
    } catch (const NotAnytimeValid& e) {
        throw CliError{kExitNotAnytimeValid, e.what()};
    } catch (const ConfigError& e) {
        throw CliError{kExitBadConfig, e.what()};
    }
    if (cfg.m0 != 0)
        throw CliError{kExitBadConfig, "the sequential test requires a singleton M0 (m0 = 0)"};
    ModelSetup setup = [&] {
        try {
            return make_setup(cfg);
        } catch (const ConfigError& e) {
            throw CliError{kExitBadConfig, e.what()};
        }
    }();

    SwitchState sw(setup.proto_m0, setup.proto_m1, setup.prior);
    std::string line;
    while (std::getline(std::cin, line)) {
        std::optional<double> x;
        x = parse_observation_line(line);  // CliError(2) on garbage
        if (!x) continue;
        try {
            sw.update(*x);
        } catch (const InvalidObservation& e) {
            throw CliError{kExitBadObservation, e.what()};
        }
        Decision d = (kind == CriterionKind::Switch) ? switch_select(sw, cfg.gamma)
                                                     : bfms_select(sw.marginal0(), sw.marginal1());
        bool rejected = tester->observe(d);
        // one status line per observation, flushed before the next read
        std::cout << d.n << ' ' << fmt17(d.log_evidence) << ' ' << fmt17(d.evidence) << ' '
                  << (rejected ? "REJECT" : "CONTINUE") << std::endl;
    }
    return 0;
}

int cmd_simulate(SimConfig cfg, const std::string& out_path) {
    Manifest man = make_manifest("simulate", cfg);
    Report report;
    try {
        report = run_simulation(cfg);
    } catch (const ConfigError& e) {
        throw CliError{kExitBadConfig, e.what()};
    }
    man.end_time = now_iso8601();
    try {
        write_file_atomic(out_path + ".csv", csv_string(man, report));
        write_file_atomic(out_path + ".json", json_string(man, report));
    } catch (const Error& e) {
        throw CliError{kExitFail, e.what()};
    }
    std::cout << "wrote " << out_path << ".csv and " << out_path << ".json (" << report.rows.size()
              << " rows)\n";
    return 0;
}

// ---- diag -------------------------------------------------------------------

std::vector<Vec> diag_grid(const FamilySpec& fam) {
    auto lin = [](double lo, double hi, int k) {
        std::vector<double> g;
        for (int i = 0; i < k; ++i) g.push_back(lo + (hi - lo) * i / (k - 1));
        return g;
    };
    std::vector<Vec> pts;
    if (fam.name == "bernoulli")
        for (double m : lin(0.2, 0.8, 17)) pts.push_back({m});
    else if (fam.name == "poisson")
        for (double m : lin(0.1, 10.0, 17)) pts.push_back({m});
    else if (fam.name == "gaussian_location")
        for (double m : lin(-3.0, 3.0, 17)) pts.push_back({m});
    else
        for (double m1 : lin(1.5, 10.0, 9))
            for (double m2 : lin(-1.0, 1.0, 9)) pts.push_back({m1, m2});
    return pts;
}

int cmd_diag(const SimConfig& cfg, double prior_scale) {
    ModelSetup setup = [&] {
        try {
            return make_setup(cfg);
        } catch (const ConfigError& e) {
            throw CliError{kExitBadConfig, e.what()};
        }
    }();
    const FamilySpec fam = setup.pair.family;
    int failures = 0;
    auto report = [&](bool ok, const std::string& name, const std::string& detail) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
        if (!ok) ++failures;
    };

    // 1. loss sandwich, rh identity, Fisher SPD, mean-map round trip.
    {
        auto pts = diag_grid(fam);
        double max_rh = 0.0, max_round = 0.0;
        bool order_ok = true, spd_ok = true;
        for (const auto& r : pts) {
            spd_ok = spd_ok && fam.fisher_info(r).spd();
            Vec round = fam.mean_map(fam.nat_map(r));
            for (int j = 0; j < fam.dim; ++j)
                max_round = std::max(max_round, std::abs(round[static_cast<std::size_t>(j)] -
                                                         r[static_cast<std::size_t>(j)]));
            for (const auto& e : pts) {
                MeanParam mr = fam.mean_param(r), me = fam.mean_param(e);
                double dr = loss(LossKind::Renyi, mr, me, fam);
                double dh = loss(LossKind::SquaredHellinger, mr, me, fam);
                double dkl = loss(LossKind::KL, mr, me, fam);
                order_ok = order_ok && dh <= dr + 1e-10 && dr <= dkl + 1e-10;
                max_rh = std::max(max_rh, std::abs(dh - 2.0 * (1.0 - std::exp(-dr / 2.0))));
            }
        }
        report(order_ok, "loss-ordering", "pointwise d_H2 <= d_R <= KL on the grid");
        report(max_rh < 1e-12, "renyi-hellinger-identity", "max deviation " + fmt17(max_rh));
        report(spd_ok, "fisher-spd", "Cholesky success at all grid points");
        report(max_round < 1e-10, "mean-map-roundtrip", "max deviation " + fmt17(max_round));
    }

    // 2. conjugate marginal vs quadrature with the configured prior (scaled
    //    by prior_scale: a non-normalized density must fail both checks).
    {
        CounterRng rng(cfg.seed, 1);
        std::vector<double> xs;
        MarginalState conj = [&] {
            if (fam.name == "gaussian_location") return MarginalState::normal_mean(cfg.sigma, cfg.prior_mean, cfg.prior_var);
            if (fam.name == "bernoulli") return MarginalState::beta_bernoulli(cfg.beta_a, cfg.beta_b);
            if (fam.name == "poisson") return MarginalState::gamma_poisson(cfg.gamma_shape, cfg.gamma_rate);
            return MarginalState::gamma_precision(cfg.gamma_shape, cfg.gamma_rate, 0.0);
        }();
        NumericPrior prior;
        FamilySpec quad_family = fam;
        if (fam.name == "gaussian_location") {
            for (int i = 0; i < 60; ++i) xs.push_back(rng.next_normal(cfg.fixed_tail[0], cfg.sigma));
            double m = cfg.prior_mean, sd = std::sqrt(cfg.prior_var);
            prior.density = [=](const Vec& v) {
                double d = (v[0] - m) / sd;
                return prior_scale * std::exp(-0.5 * d * d) / (sd * std::sqrt(2.0 * M_PI));
            };
            prior.box = {Interval{m - 10 * sd, m + 10 * sd}};
        } else if (fam.name == "bernoulli") {
            for (int i = 0; i < 60; ++i) xs.push_back(rng.next_bernoulli(0.5) ? 1.0 : 0.0);
            double a = cfg.beta_a, b = cfg.beta_b;
            double lognorm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
            prior.density = [=](const Vec& v) {
                return prior_scale * std::exp(lognorm + (a - 1) * std::log(v[0]) + (b - 1) * std::log1p(-v[0]));
            };
            prior.box = {Interval{1e-9, 1.0 - 1e-9}};
        } else if (fam.name == "poisson") {
            for (int i = 0; i < 60; ++i) xs.push_back(static_cast<double>(rng.next_poisson(1.0)));
            double a = cfg.gamma_shape, b = cfg.gamma_rate;
            prior.density = [=](const Vec& v) {
                return prior_scale * std::exp(a * std::log(b) - std::lgamma(a) + (a - 1) * std::log(v[0]) - b * v[0]);
            };
            prior.box = {Interval{1e-9, 40.0}};
        } else {
            // pinned-mean Gaussian: integrate over the precision chart
            for (int i = 0; i < 60; ++i) xs.push_back(rng.next_normal(0.0, 1.0));
            double a = cfg.gamma_shape, b = cfg.gamma_rate;
            prior.density = [=](const Vec& v) {
                return prior_scale * std::exp(a * std::log(b) - std::lgamma(a) + (a - 1) * std::log(v[0]) - b * v[0]);
            };
            prior.box = {Interval{1e-6, 50.0}};
            prior.to_mean = [](const Vec& v) { return Vec{1.0 / v[0], 0.0}; };
        }
        for (double x : xs) conj.update(x);
        double mass = numeric_prior_mass(prior);
        report(std::abs(mass - 1.0) < 1e-6, "prior-normalization", "integral " + fmt17(mass));
        try {
            double quad = quadrature_log_marginal(quad_family, prior, xs, 1e-8);
            double diff = std::abs(quad - conj.log_marginal());
            report(diff < 1e-6, "conjugate-vs-quadrature", "|difference| " + fmt17(diff));
        } catch (const GridTooCoarse& e) {
            report(false, "conjugate-vs-quadrature", e.what());
        }
    }

    // 3. Laplace diagnostic trend (Gaussian location reference setup).
    {
        auto gfam = gaussian_location(cfg.sigma);
        CounterRng rng(cfg.seed, 2);
        MarginalState s = MarginalState::normal_mean(cfg.sigma, cfg.prior_mean, cfg.prior_var);
        std::vector<double> xs;
        std::vector<double> diag;
        for (int n = 1; n <= 10000; ++n) {
            double x = rng.next_normal(0.0, cfg.sigma);
            xs.push_back(x);
            s.update(x);
            if (n == 100 || n == 1000 || n == 10000) diag.push_back(laplace_diagnostic(s, gfam, xs));
        }
        double mu_hat = 0.0;
        for (double x : xs) mu_hat += x;
        mu_hat /= static_cast<double>(xs.size());
        double omega = std::exp(-0.5 * (mu_hat - cfg.prior_mean) * (mu_hat - cfg.prior_mean) / cfg.prior_var) /
                       std::sqrt(2.0 * M_PI * cfg.prior_var);
        double target = std::log(std::sqrt(1.0 / (cfg.sigma * cfg.sigma)) / omega);
        bool ok = std::abs(diag[2] - target) < 0.05 && std::abs(diag[2] - diag[1]) < std::abs(diag[1] - diag[0]);
        report(ok, "laplace-trend",
               "n=1e4 diagnostic " + fmt17(diag[2]) + " target " + fmt17(target));
    }

    return failures == 0 ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"switch-criterion model selection for nested exponential families"};
    app.require_subcommand(1);

    std::string data_path, config_path, out_path, criterion = "switch", kind;
    double alpha = 0.05, prior_scale = 1.0;
    std::int64_t seed_override = -1, reps_override = -1, horizon_override = -1;
    int workers_override = -1;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", config_path, "config file (key value lines)");
        c->add_option("--seed", seed_override, "override config seed");
        c->add_option("--reps", reps_override, "override replication count");
        c->add_option("--horizon", horizon_override, "override stream horizon");
        c->add_option("--workers", workers_override, "worker threads (0 = hardware)");
    };

    CLI::App* sel = app.add_subcommand("select", "one-shot model selection on a data file");
    sel->add_option("--data", data_path, "observations, one per line (CSV or JSON lines)")->required();
    sel->add_option("--criterion", criterion, "switch|bayes|aic|bic|hq");
    add_common(sel);

    CLI::App* tst = app.add_subcommand("test", "anytime-valid sequential test on stdin");
    tst->add_option("--alpha", alpha, "significance level");
    tst->add_option("--criterion", criterion, "switch|bayes");
    add_common(tst);

    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo experiments");
    sim->add_option("kind", kind, "risk|stopping|power|lil|consistency|decomposition");
    sim->add_option("--out", out_path, "output path prefix (<out>.csv, <out>.json)")->required();
    add_common(sim);

    CLI::App* dia = app.add_subcommand("diag", "numerical diagnostics (exit 1 on any FAIL)");
    dia->add_option("--prior-scale", prior_scale, "scale the diag prior density (negative control)");
    add_common(dia);

    CLI11_PARSE(app, argc, argv);

    auto apply_overrides = [&](SimConfig& cfg) {
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
        if (reps_override >= 0) cfg.reps = reps_override;
        if (horizon_override >= 0) cfg.horizon = horizon_override;
        if (workers_override >= 0) cfg.workers = workers_override;
    };

    try {
        if (sel->parsed()) {
            SimConfig cfg = load_config(config_path);
            if (sel->count("--criterion") > 0 || cfg.criteria.empty()) cfg.criteria = {criterion};
            apply_overrides(cfg);
            return cmd_select(cfg, data_path);
        }
        if (tst->parsed()) {
            SimConfig cfg = load_config(config_path);
            std::string crit = criterion;
            if (tst->count("--criterion") == 0 && !cfg.criteria.empty()) crit = cfg.criteria[0];
            apply_overrides(cfg);
            return cmd_test(cfg, alpha, crit);
        }
        if (sim->parsed()) {
            SimConfig cfg = load_config(config_path, kind);
            if (!kind.empty()) cfg.kind = kind;
            apply_overrides(cfg);
            return cmd_simulate(cfg, out_path);
        }
        if (dia->parsed()) {
            SimConfig cfg = load_config(config_path);
            apply_overrides(cfg);
            return cmd_diag(cfg, prior_scale);
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
    return 0;
}
