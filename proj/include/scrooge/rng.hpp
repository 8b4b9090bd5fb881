#pragma once

#include <cstdint>

namespace scrooge {

/// Counter-based pseudo-random generator with independent substreams.
///
/// Draw i of stream s under seed q is out_i = avalanche(origin(q, s) + i * GAMMA),
/// where avalanche is the SplitMix64 finalizer and origin folds seed and stream
/// through the same finalizer. A (seed, stream, draw index) triple therefore maps
/// to one fixed 64-bit word: substreams can be handed to concurrent workers and
/// the serial and parallel schedules produce identical draws.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : origin_(avalanche(avalanche(seed + kGamma) ^ (stream * kStreamSalt + 0x1d8e4e27c47d124full))) {}

    std::uint64_t next_u64() { return avalanche(origin_ + (++counter_) * kGamma); }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
    std::uint64_t next_index(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t u = next_u64();
            if (u >= threshold) return u % n;
        }
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
    static constexpr std::uint64_t kStreamSalt = 0xbf58476d1ce4e5b9ull;

    static std::uint64_t avalanche(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t origin_;
    std::uint64_t counter_ = 0;
};

}  // namespace scrooge
