#pragma once

#include <cstdint>
#include <initializer_list>

namespace motorlab {

/// Counter-based random stream built on the SplitMix64 output function.
///
/// Draw i of a stream with key k is mix64(k + (i + 1) * 0x9E3779B97F4A7C15),
/// i.e. the i-th output of SplitMix64 seeded with k. Child streams are keyed
/// by mixing the parent key with a tag, so any trial can be regenerated from
/// (seed, purpose, index) alone, independent of evaluation order or threads.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr Rng(std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Independent child stream identified by `tag`.
  [[nodiscard]] constexpr Rng split(std::uint64_t tag) const { return Rng(mix64(key_ ^ mix64(tag + kGamma))); }
  [[nodiscard]] constexpr Rng split(std::initializer_list<std::uint64_t> tags) const {
    Rng r = *this;
    for (auto t : tags) r = r.split(t);
    return r;
  }

  constexpr std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  [[nodiscard]] constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stable tags for the purposes a stream can serve.
enum class StreamTag : std::uint64_t {
  Init = 1,
  Training = 2,
  Validation = 3,
  Test = 4,
  Retrain = 5,
};

constexpr std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

}  // namespace motorlab
