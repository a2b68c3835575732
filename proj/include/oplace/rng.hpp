#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace oplace {

// Stream derivation scheme
// ------------------------
// Every random draw in the library comes from a stream identified by
// (root seed, purpose tag, row index, venue index). Child seeds are produced
// by chaining SplitMix64 over the path, and each stream runs its own
// std::mt19937_64. Consequences relied on elsewhere:
//   * identical (model, seed, count) batches are byte-for-byte identical,
//   * batches with different counts share a prefix (common random numbers
//     across iteration grids come free),
//   * work can be partitioned across workers at row granularity without
//     changing any draw.
namespace streams {

inline constexpr std::uint64_t kSolve = 0x501BEu;      // SA iterate draws
inline constexpr std::uint64_t kEval = 0xE7A1u;        // objective evaluation batches
inline constexpr std::uint64_t kHoldout = 0x407Du;     // study-level held-out batches
inline constexpr std::uint64_t kKkt = 0x6B6Bu;         // KKT estimation batches
inline constexpr std::uint64_t kBrute = 0xB407u;       // brute-force common batches
inline constexpr std::uint64_t kBatch = 0x5A3Cu;       // plain sample() batches
inline constexpr std::uint64_t kDual = 0xD0A1u;        // dual-search inner solves
inline constexpr std::uint64_t kBucket = 0xB0C4u;      // per-bucket solves

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = seed;
    std::uint64_t out = splitmix64(state);
    for (std::uint64_t tag : path) {
        state = out ^ (tag * 0xD1B54A32D192ED03ull + 0x8BB84B93962EACC9ull);
        out = splitmix64(state);
    }
    return out;
}

}  // namespace streams

// mt19937_64 engine plus the explicit inverse-CDF / rejection transforms used
// by the outflow models. std::distributions are avoided on purpose: their
// outputs are not pinned by the standard, these are.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    double pareto(double scale_xm, double tail_a) {
        return scale_xm * std::pow(1.0 - uniform(), -1.0 / tail_a);
    }

    // Poisson draw; PTRS rejection for large means, Knuth multiplication below 10.
    double poisson(double lambda);

    std::uint64_t next_u64() { return eng_(); }

  private:
    std::mt19937_64 eng_;
};

}  // namespace oplace
