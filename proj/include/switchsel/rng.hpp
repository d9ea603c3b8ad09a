#pragma once
#include <cstdint>
#include <cmath>

namespace switchsel {

// Counter-based random stream. Each stream is keyed by (seed, stream id) and
// produces its sequence purely as a function of an internal counter, so any
// partition of work across threads replays the exact same numbers. Stream ids
// encode (cell index, replication index) in the simulation harness.
//
// The generator applies the splitmix64 finalizer to key ^ counter with two
// distinct round constants; the finalizer is invertible and equidistributed
// over 64-bit counters.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(derive_key(seed, stream)) {}

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + (ctr_++) * 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on (0,1): 53-bit mantissa, offset so 0 is excluded.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second variate is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

    bool next_bernoulli(double p) { return next_unit() < p; }

    // Knuth's product method; adequate for the desk-scale rates used here.
    long next_poisson(double lambda) {
        double limit = std::exp(-lambda);
        double prod = 1.0;
        long k = -1;
        do {
            ++k;
            prod *= next_unit();
        } while (prod > limit);
        return k;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed ^ (stream * 0xda942042e4dd58b5ull + 0x2545f4914f6cdd1dull);
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdull;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
        return z ^ (z >> 33);
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stable stream id for (cell, replication) pairs.
inline std::uint64_t stream_id(std::uint64_t cell, std::uint64_t rep) {
    return cell * 0x100000000ull + rep;
}

}  // namespace switchsel
