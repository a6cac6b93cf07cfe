#pragma once

#include <cstdint>

namespace fedhql {

/// SplitMix64 pseudo-random generator (Steele, Lea & Flood 2014).
///
/// Chosen as the project-wide PRNG because the full algorithm fits in a
/// dozen lines, produces identical streams in any language with 64-bit
/// unsigned arithmetic, and splits cleanly: `split()` seeds a child
/// generator from the parent stream, so every environment copy, agent and
/// worker gets an independent, reproducible stream.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) using the top 53 bits.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n). Modulo reduction; the bias is below
    /// 2^-50 for every n used in this project (n < 2^14).
    std::uint64_t next_below(std::uint64_t n) noexcept {
        return next_u64() % n;
    }

    /// Child generator seeded from this stream.
    SplitMix64 split() noexcept { return SplitMix64(next_u64()); }

private:
    std::uint64_t state_;
};

/// Deterministic seed derivation: one SplitMix64 finalizer pass over
/// (base, tag, index). Used to give each role (agent env, eval env,
/// network init, ...) its own stream per run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                                 std::uint64_t index = 0) noexcept {
    SplitMix64 g(base ^ (tag * 0x9E3779B97F4A7C15ULL) ^
                 (index * 0xD1B54A32D192ED03ULL));
    g.next_u64();
    return g.next_u64();
}

// Stream tags for derive_seed. Values are arbitrary but frozen: changing
// them changes every reproducible run.
namespace seed_tag {
inline constexpr std::uint64_t kAgentEnv = 0xA1;
inline constexpr std::uint64_t kEvalEnv = 0xA2;
inline constexpr std::uint64_t kNetInit = 0xA3;
inline constexpr std::uint64_t kAction = 0xA4;
inline constexpr std::uint64_t kReplay = 0xA5;
inline constexpr std::uint64_t kServerEnv = 0xB1;
}  // namespace seed_tag

}  // namespace fedhql
