#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "switchsel/criteria.hpp"
#include "switchsel/rng.hpp"

namespace switchsel {

/// Stopping rules are functions of the observed prefix only: they may look at
/// the evidence at sample size n, never ahead.
struct StoppingRule {
    enum class Kind { FixedN, FirstCrossing, MaxHorizon, DataPeek };
    Kind kind = Kind::FirstCrossing;
    std::int64_t fixed_n = 0;
    std::int64_t peek_every = 1;

    bool checks_at(std::int64_t n) const {
        switch (kind) {
            case Kind::FixedN: return n == fixed_n;
            case Kind::DataPeek: return n % peek_every == 0;
            default: return true;  // FirstCrossing / MaxHorizon check every step
        }
    }
    static StoppingRule parse(const std::string& name, std::int64_t fixed_n, std::int64_t peek_every);
    std::string name() const;
};

/// Fully resolved Monte Carlo configuration. Identical configs (including the
/// seed) produce bit-identical reports at any worker count.
struct SimConfig {
    std::string kind = "risk";  // risk|stopping|power|lil|consistency|decomposition
    std::uint64_t seed = 20260808;
    std::int64_t reps = 2000;
    std::vector<std::int64_t> n_grid = {32, 128, 512, 2048, 4096};
    int workers = 0;  // 0 = hardware concurrency

    std::string family = "gaussian_location";
    double sigma = 1.0;
    int m0 = 0;
    Vec fixed_tail = {0.0};

    // Priors (per family; unit defaults).
    double prior_mean = 0.0, prior_var = 1.0;
    double beta_a = 1.0, beta_b = 1.0;
    double gamma_shape = 1.0, gamma_rate = 1.0;
    double nig_m = 0.0, nig_kappa = 1.0, nig_a = 1.0, nig_b = 1.0;

    // Criteria to evaluate (risk/consistency use the first entry; stopping and
    // power evaluate all listed on shared streams). always0/always1 are
    // oracle criteria for harness baselines.
    std::vector<std::string> criteria = {"switch"};
    double gamma = 1.0;
    double aic_t = 1.0;
    double hq_c = 1.0;
    double lil_hq_c = 1.2;
    double switch_kappa = 2.0;

    std::string estimator = "mle";
    std::string fallback = "map";
    double lambda0 = 1.0;
    std::string loss = "sq";

    std::vector<double> alphas = {0.01, 0.05, 0.1};
    std::int64_t horizon = 10000;
    std::vector<std::int64_t> horizons = {100, 1000, 10000};
    std::string rule = "first_crossing";
    std::int64_t rule_fixed_n = 0;
    std::int64_t peek_every = 1;

    // Risk grid: shell_points equispaced over null +- sqrt(shell_mult * log log n / n)
    // plus one-sided far offsets.
    double shell_mult = 10.0;
    int shell_points = 33;
    std::vector<double> far_offsets = {0.25, 0.5, 1.0, 2.0, 4.0};

    // Power sweep: separations sqrt(s * loglog n / n) and sqrt(s * log n / n).
    std::vector<double> s_grid = {0, 1, 2, 3, 4, 5, 6, 8, 10, 12};
    std::vector<std::string> shells = {"loglog", "log"};

    double alt_offset = 1.0;     // consistency alternative
    double decomp_offset = 0.5;  // decomposition alternative

    std::map<std::string, std::string> resolved() const;
};

// Parse "key value" / "key = value" lines over the defaults for the given
// kind; unknown keys are errors.
SimConfig parse_sim_config(const std::string& text, const std::string& kind_hint = "");
void apply_config_line(SimConfig& cfg, const std::string& key, const std::string& value);

/// Column-major-free tabular result; all cells pre-formatted so serialization
/// is byte-stable.
struct Report {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::map<std::string, std::string> summary;  // derived scalars for the JSON artifact
};

Report simulate_risk(const SimConfig& cfg);
Report risk_decomposition_check(const SimConfig& cfg);
Report simulate_stopping(const SimConfig& cfg);
Report lil_failure_demo(const SimConfig& cfg);
Report simulate_power(const SimConfig& cfg);
Report consistency_trace(const SimConfig& cfg);

// Dispatch on cfg.kind; ConfigError for unknown kinds.
Report run_simulation(const SimConfig& cfg);

// ---- shared machinery (used by the CLI's select/test commands too) ---------

struct ModelSetup {
    NestedPair pair;
    MarginalState proto_m0;  // fresh marginal prototypes, copied per stream
    MarginalState proto_m1;
    SwitchPrior prior;
    int fam_code = 0;  // 0 gauss_loc, 1 bernoulli, 2 poisson, 3 meanvar
    double sigma = 1.0;
};

ModelSetup make_setup(const SimConfig& cfg);

// One observation from the truth mu (mean parameterization).
double draw_observation(CounterRng& rng, const ModelSetup& setup, const Vec& mu);

std::string fmt17(double v);

}  // namespace switchsel
