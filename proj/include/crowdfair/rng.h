#ifndef CROWDFAIR_RNG_H_
#define CROWDFAIR_RNG_H_

#include <cstdint>

namespace crowdfair {

/// xoshiro256** seeded through SplitMix64.
///
/// Every stochastic routine in the library draws from a substream identified
/// by (seed, stream id). Substreams are derived by hashing both values through
/// SplitMix64, so generating task t never depends on how many draws tasks
/// 0..t-1 consumed, and appending tasks leaves earlier draws untouched. All
/// conversions to doubles and bounded integers are done here rather than with
/// <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi].
  double uniform(double lo, double hi);
  /// Returns true with probability p.
  bool bernoulli(double p);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Combines a seed and an arbitrary number of labels into a new seed; used to
/// give experiment repetitions independent substream families.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace crowdfair

#endif  // CROWDFAIR_RNG_H_
