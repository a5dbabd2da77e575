#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>

namespace pbnn {

/// Seeded deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform and normal variates are derived here rather than through
/// <random> distributions, whose algorithms are implementation-defined:
///   uniform()        53 high bits of one draw scaled to [0, 1)
///   uniform_int(n)   rejection sampling on the top of the 64-bit range
///   normal()         Box-Muller, both variates of a pair are used in order
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();

  /// Independent stream keyed by (seed, tag); the parent is not advanced.
  Rng derive(std::uint64_t tag) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// SplitMix64 finalizer, used to key derived streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace pbnn
