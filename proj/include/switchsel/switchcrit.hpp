#pragma once
#include <bit>
#include <cstdint>
#include <vector>

#include "switchsel/evidence.hpp"

namespace switchsel {

// Mass at switch time t = 2^i under the default kappa = 2 prior:
// pi(2^i) = 1/((i+1)(i+2)), zero off the powers of two.
double default_pi(int i);

/// Prior over switch times restricted to powers of two, pi(2^i) ~ (i+1)^-kappa
/// with kappa >= 2. kappa = 2 uses the closed form above (total mass
/// telescopes to 1); other kappa normalize by the Riemann zeta value.
class SwitchPrior {
  public:
    explicit SwitchPrior(double kappa = 2.0);

    double kappa() const { return kappa_; }
    double pi(int i) const;
    double log_pi(int i) const;
    // Mass of switch times with index >= i.
    double tail_from(int i) const;
    // g(n) = sum of pi(t) over powers of two t >= n (n >= 1).
    double g(std::int64_t n) const;
    // Mass of switch times t > n (t = n+1, ... as powers of two).
    double tail_mass_beyond(std::int64_t n) const;

  private:
    double kappa_;
    double zeta_ = 0.0;  // unused for the default prior
};

struct Snapshot {
    std::int64_t t;   // switch time, a power of two (t-1 observations seen)
    double log_pb0;   // log p_{B,0}(x^{t-1})
    double log_pb1;   // log p_{B,1}(x^{t-1})
};

/// Switch-evidence accumulator: both Bayes marginals plus the power-of-two
/// snapshots needed to price every switch time. Memory is O(log n).
class SwitchState {
  public:
    SwitchState(MarginalState m0, MarginalState m1, SwitchPrior prior = SwitchPrior());

    void update(double x);

    std::int64_t n() const { return m0_.n(); }
    double log_pb0() const { return m0_.log_marginal(); }
    double log_pb1() const { return m1_.log_marginal(); }

    // log p_sw,1(x^n): switched terms for recorded t <= n plus the
    // not-yet-switched tail, which contributes p_{B,0}(x^n).
    double log_psw1() const;

    // Robust-test evidence r_sw = p_{B,0} / p_sw,1 (small = against M0).
    double log_r_sw() const { return log_pb0() - log_psw1(); }
    double r_sw() const;

    // delta_sw: 0 iff p_sw,1 / p_B0 <= gamma (ties go to the simple model).
    int select(double gamma = 1.0) const;

    // Head-sum variant over strictly earlier switch times: 1 iff
    // sum_{t < n} pi(t) pbar_t(x^n) > (1 + g(n)) p_{B,0}(x^n). Needs n >= 1.
    // Whenever this selects the complex model, select() does too.
    int conservative_select() const;

    const std::vector<Snapshot>& snapshots() const { return snapshots_; }
    const MarginalState& marginal0() const { return m0_; }
    const MarginalState& marginal1() const { return m1_; }
    const SwitchPrior& prior() const { return prior_; }

  private:
    MarginalState m0_;
    MarginalState m1_;
    SwitchPrior prior_;
    std::vector<Snapshot> snapshots_;
    std::size_t next_active_ = 0;  // first snapshot with t > n
    double log_head_;              // LSE over active t of log pi + s0 - s1
    double log_tail_;              // log tail_mass_beyond(n)
};

}  // namespace switchsel
