#pragma once

#include <cmath>
#include <cstdint>

namespace kooplab {

// Counter-based generator: output i depends only on (seed, stream, i), so
// parallel and serial consumers of distinct streams agree bit-for-bit.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(mix(seed) ^ (mix(stream + 0x9e3779b97f4a7c15ULL) | 1))) {}

    std::uint64_t next_u64() { return mix(key_ + mix(counter_++)); }

    // 53-bit uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // Box-Muller; consumes two uniforms per draw, no caching.
    double normal(double mean = 0.0, double std = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        // keep log argument away from exact zero
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return mean + std * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Named streams so independent consumers never share a sequence.
namespace rng_stream {
inline constexpr std::uint64_t kTrajectoryInit = 1;
inline constexpr std::uint64_t kParamInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kDropout = 4;
inline constexpr std::uint64_t kKoopmanBands = 5;
}  // namespace rng_stream

}  // namespace kooplab
