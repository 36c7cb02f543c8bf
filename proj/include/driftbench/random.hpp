#pragma once

#include <cstdint>
#include <random>

#include "driftbench/core.hpp"

namespace driftbench {

using Rng = std::mt19937_64;

/// Purpose tags for substreams. Distinct tags never share a generator.
enum class Stream : std::uint64_t {
  kDriftPath = 1,
  kLearningBatch = 2,
  kOracleSample = 3,
  kEvaluationSample = 4,
  kFixture = 5,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the substream identified by (master, run, round, purpose).
///
/// Each coordinate is folded through splitmix64 so that neighbouring runs
/// or rounds do not produce correlated engine states. The rule only depends
/// on the tuple, never on the order in which substreams are requested.
inline constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t run,
                                              std::uint64_t round, Stream purpose) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ splitmix64(run + 0x632BE59BD9B4E019ULL));
  h = splitmix64(h ^ splitmix64(round + 0x85157AF5ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::uint64_t run, std::uint64_t round,
                    Stream purpose) {
  return Rng(substream_seed(master, run, round, purpose));
}

/// Fills `out` with iid N(0, variance) draws.
inline void fill_gaussian(Rng& rng, std::span<double> out, double variance = 1.0) {
  detail::require(variance >= 0.0, "fill_gaussian: negative variance");
  if (variance == 0.0) {
    for (double& v : out) v = 0.0;
    return;
  }
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  for (double& v : out) v = normal(rng);
}

inline Vector gaussian_vector(Rng& rng, std::size_t n, double variance = 1.0) {
  Vector v(n);
  fill_gaussian(rng, v, variance);
  return v;
}

}  // namespace driftbench
