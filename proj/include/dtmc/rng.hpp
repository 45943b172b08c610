#pragma once

#include <cstdint>
#include <random>

// Deterministic randomness. Replica and per-pipe streams are derived from
// one root seed by a counter-based split (splitmix64 finalizer over a
// golden-ratio counter), so streams are independent of evaluation order
// and safe to consume from parallel workers. All draws go through the
// helpers below; the std distributions are avoided because their output
// sequences are implementation-defined.

namespace dtmc::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of the index-th child stream of a root seed. Stateless, so child
/// streams can be created in any order (or concurrently).
inline std::uint64_t child_seed(std::uint64_t root, std::uint64_t index) {
    return mix64(root + 0x9E3779B97F4A7C15ULL * (index + 1));
}

/// One deterministic uniform stream.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on {0, ..., n-1}, unbiased via rejection. n >= 1.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t overhang = (UINT64_MAX % n + 1) % n;
        const std::uint64_t limit = UINT64_MAX - overhang;
        std::uint64_t r = next_u64();
        while (r > limit) r = next_u64();
        return r % n;
    }

private:
    std::mt19937_64 engine_;  // sequence pinned by the standard
};

}
