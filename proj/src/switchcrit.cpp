#include "switchsel/switchcrit.hpp"

#include <cmath>

#include "switchsel/stats.hpp"

namespace switchsel {

namespace {

bool is_pow2(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

int log2_exact(std::int64_t t) { return std::countr_zero(static_cast<std::uint64_t>(t)); }

// Smallest i with 2^i > n (n >= 0).
int first_index_beyond(std::int64_t n) {
    return n <= 0 ? 0 : static_cast<int>(std::bit_width(static_cast<std::uint64_t>(n)));
}

// Smallest i with 2^i >= n (n >= 1).
int first_index_at_or_after(std::int64_t n) {
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(n - 1)));
}

}  // namespace

double default_pi(int i) {
    double ip1 = static_cast<double>(i) + 1.0;
    return 1.0 / (ip1 * (ip1 + 1.0));
}

SwitchPrior::SwitchPrior(double kappa) : kappa_(kappa) {
    if (kappa < 2.0) throw ConfigError("switch prior needs kappa >= 2");
    if (kappa_ != 2.0) zeta_ = std::riemann_zeta(kappa_);
}

double SwitchPrior::pi(int i) const {
    if (kappa_ == 2.0) return default_pi(i);
    return std::pow(static_cast<double>(i) + 1.0, -kappa_) / zeta_;
}

double SwitchPrior::log_pi(int i) const { return std::log(pi(i)); }

double SwitchPrior::tail_from(int i) const {
    if (i <= 0) return 1.0;
    if (kappa_ == 2.0) return 1.0 / (static_cast<double>(i) + 1.0);  // telescoping
    double head = 0.0;
    for (int j = 0; j < i; ++j) head += std::pow(static_cast<double>(j) + 1.0, -kappa_);
    return (zeta_ - head) / zeta_;
}

double SwitchPrior::g(std::int64_t n) const { return tail_from(first_index_at_or_after(n)); }

double SwitchPrior::tail_mass_beyond(std::int64_t n) const { return tail_from(first_index_beyond(n)); }

SwitchState::SwitchState(MarginalState m0, MarginalState m1, SwitchPrior prior)
    : m0_(std::move(m0)), m1_(std::move(m1)), prior_(prior), log_head_(kNegInf), log_tail_(0.0) {
    if (m0_.n() != 0 || m1_.n() != 0) throw ConfigError("switch state must start from fresh marginals");
    snapshots_.push_back(Snapshot{1, 0.0, 0.0});
}

void SwitchState::update(double x) {
    m0_.update(x);
    m1_.update(x);
    const std::int64_t n = m0_.n();
    // A stored switch time becomes active once its prefix is fully observed.
    if (next_active_ < snapshots_.size() && snapshots_[next_active_].t == n) {
        const Snapshot& s = snapshots_[next_active_++];
        log_head_ = log_sum_exp(log_head_, prior_.log_pi(log2_exact(s.t)) + s.log_pb0 - s.log_pb1);
    }
    if (is_pow2(n + 1))
        snapshots_.push_back(Snapshot{n + 1, m0_.log_marginal(), m1_.log_marginal()});
    log_tail_ = std::log(prior_.tail_mass_beyond(n));
}

double SwitchState::log_psw1() const {
    return log_sum_exp(m1_.log_marginal() + log_head_, m0_.log_marginal() + log_tail_);
}

double SwitchState::r_sw() const { return std::exp(log_r_sw()); }

int SwitchState::select(double gamma) const {
    return (log_psw1() - log_pb0() <= std::log(gamma)) ? 0 : 1;
}

int SwitchState::conservative_select() const {
    const std::int64_t nn = n();
    if (nn < 1) throw NTooSmall("conservative switch criterion needs n >= 1");
    double head = kNegInf;
    for (const Snapshot& s : snapshots_) {
        if (s.t >= nn) break;
        head = log_sum_exp(head, prior_.log_pi(log2_exact(s.t)) + s.log_pb0 + log_pb1() - s.log_pb1);
    }
    double rhs = std::log1p(prior_.g(nn)) + log_pb0();
    return head > rhs ? 1 : 0;
}

}  // namespace switchsel
