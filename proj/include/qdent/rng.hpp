#pragma once

#include <cmath>
#include <cstdint>

namespace qdent {

// Counter-seeded SplitMix64 generator. Every pulse/resample gets its own
// stream via mix_seed(seed, index), so parallel loops reproduce the serial
// result bit for bit regardless of thread count or iteration order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1]; never returns 0 so log() is safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double exponential(double mean) { return -mean * std::log(uniform()); }

    // Box-Muller; one fresh pair per call, the spare is discarded to keep
    // the per-call draw count fixed.
    double normal(double stddev) {
        double u1 = uniform();
        double u2 = uniform();
        return stddev * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Knuth product method below 30, normal approximation above.
    long long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            double limit = std::exp(-mean);
            double prod = uniform();
            long long n = 0;
            while (prod > limit) {
                prod *= uniform();
                ++n;
            }
            return n;
        }
        double x = mean + std::sqrt(mean) * normal(1.0) + 0.5;
        return x < 0.0 ? 0 : static_cast<long long>(x);
    }

  private:
    std::uint64_t state_;
};

// Decorrelates (seed, index) pairs into independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL + index * 0xd1342543de82ef95ULL);
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return z ^ (z >> 33);
}

}  // namespace qdent
