#pragma once

#include <cstdint>
#include <limits>

namespace tangled {

/// SplitMix64 finalizer (Steele, Lea & Flood, "Fast splittable pseudorandom
/// number generators", OOPSLA 2014). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Counter-based SplitMix64.
///
/// The i-th output (i = 1, 2, ...) for key K is splitmix64_mix(K + i * gamma),
/// which is bit-for-bit the reference SplitMix64 stream seeded with K. Any
/// implementation of that stream reproduces our traces; the first outputs for
/// key 0 are pinned in tests/test_permutation.cpp.
///
/// Satisfies UniformRandomBitGenerator so it can feed <random> as well.
class CounterRng {
public:
    using result_type = std::uint64_t;

    static constexpr const char* name = "splitmix64-counter";

    constexpr explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
        : key_(key), counter_(counter) {}

    constexpr result_type operator()() noexcept {
        ++counter_;
        return splitmix64_mix(key_ + counter_ * kGoldenGamma);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform01() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

/// Derives an independent stream key from (master, a, b). Used to give every
/// (cell, trial) pair of a sweep its own generator regardless of scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept {
    std::uint64_t h = splitmix64_mix(master + kGoldenGamma);
    h = splitmix64_mix(h ^ (a + 2 * kGoldenGamma));
    h = splitmix64_mix(h ^ (b + 3 * kGoldenGamma));
    return h;
}

}  // namespace tangled
