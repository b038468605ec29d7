#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace eblime {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn stream names into key material.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based SplitMix64 generator.
///
/// The n-th output of a stream is `mix64(key + n * golden)`, so every draw is a
/// pure function of (key, n). Streams are split by name and index:
///
///     CounterRng::stream(seed, "beta", i)
///
/// derives an independent key from the master seed, the substream name and the
/// per-item index. Items (mask rows, posterior samples) therefore never share
/// state, which keeps parallel evaluation order-independent and lets a run with
/// more samples reproduce the draws of a shorter run as a prefix.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr CounterRng stream(std::uint64_t seed, std::string_view tag,
                                     std::uint64_t index = 0) noexcept {
    return CounterRng(mix64(mix64(seed ^ hash_tag(tag)) + mix64(index + kGolden)));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  // Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept { return to_unit((*this)()); }

  // The uniform the n-th call (0-based) of a fresh stream would return.
  // Does not advance the counter.
  constexpr double uniform_at(std::uint64_t n) const noexcept {
    return to_unit(mix64(key_ + (n + 1) * kGolden));
  }

  double exponential() noexcept;
  double normal() noexcept;
  // Gamma(shape, 1). Marsaglia-Tsang; shape < 1 via the U^(1/shape) boost.
  double gamma(double shape) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr double to_unit(std::uint64_t x) noexcept {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace eblime
