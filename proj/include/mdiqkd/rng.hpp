#pragma once

#include <cstdint>

namespace mdiqkd {

/// Counter-based splittable randomness. Every round of the simulation owns an
/// independent stream derived from (run seed, round index), so rounds can be
/// generated in any order or split across threads and still reproduce the
/// same draws bit for bit.
namespace rng {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kStreamStep = 0xd1b54a32d192ed03ULL;

/// SplitMix64 finalizer (Steele/Lea/Flood). Full-avalanche 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Pure function of (seed, round index); equal inputs give equal outputs.
constexpr std::uint64_t derive_round_seed(std::uint64_t seed, std::uint64_t round_index) {
    return mix64(seed + kGolden * (round_index + 1));
}

/// Per-round generator: a hashed counter stream. The increment constant
/// differs from the one used in derive_round_seed so consecutive rounds do
/// not walk the same arithmetic progression.
class Stream {
  public:
    explicit Stream(std::uint64_t stream_seed) : state_(stream_seed) {}

    std::uint64_t next_u64() {
        state_ += kStreamStep;
        return mix64(state_);
    }

    /// Uniform double in [0, 1), 53 significant bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Bernoulli(p) draw. Always consumes exactly one value.
    bool next_bernoulli(double p) { return next_unit() < p; }

    bool next_bit() { return (next_u64() & 1ULL) != 0; }

  private:
    std::uint64_t state_;
};

}  // namespace rng
}  // namespace mdiqkd
