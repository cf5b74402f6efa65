#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace fawmf {

// Portable pseudo-random source.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are not (their algorithms are
// implementation-defined), so every derived quantity is computed here:
//   uniform01()  = (next() >> 11) * 2^-53, in [0, 1)
//   below(n)     = rejection sampling on next() against the largest multiple
//                  of n that fits in 64 bits
//   shuffle      = Fisher-Yates from the back, swap index drawn with below()
// Sub-seeds for independent subsystems come from derive_seed(), a SplitMix64
// finalizer over (root seed, FNV-1a hash of a stream name).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

}  // namespace fawmf
