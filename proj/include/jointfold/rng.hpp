#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace jointfold {

namespace detail {

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based generator: output i is a bijective mix of (key, i).
///
/// Any draw can be reproduced from the key and its position alone, which is
/// what lets per-trial and per-sample streams be generated in any order.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(detail::splitmix_finalize(key ^ 0x6a09e667f3bcc909ULL)),
        counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    return detail::splitmix_finalize(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Child seed for a named sub-stream, e.g. derive_seed(root, "classify/trials").
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view path) {
  return detail::splitmix_finalize(root ^ detail::splitmix_finalize(detail::fnv1a(path)));
}

/// Child seed for an indexed sub-stream (trial, sample, sensor).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return detail::splitmix_finalize(root + 0xd1b54a32d192ed03ULL * (index + 1));
}

}  // namespace jointfold
