#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace dmap {

// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a. Stable across platforms, used to key substreams by text_id.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Purposes for which per-position substreams are drawn. Each one gets an
// independent stream so that, e.g., enabling random-order PIT does not shift
// the within-interval draws.
enum class StreamTag : std::uint64_t {
  kSamplePoint = 1,
  kPermutation = 2,
  kGeneration = 3,
  kModel = 4,
  kNull = 5,
};

// SplitMix64 generator. Satisfies std::uniform_random_bit_generator, so it
// can drive the <random> distributions where those are needed.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  // Substream keyed by (seed, text_id, pos, tag). The result depends only on
  // the key, never on how many other substreams were drawn before.
  static SplitMix64 keyed(std::uint64_t seed, std::string_view text_id,
                          std::uint64_t pos, StreamTag tag) noexcept {
    std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ULL);
    k = mix64(k ^ fnv1a64(text_id));
    k = mix64(k ^ pos);
    k = mix64(k ^ static_cast<std::uint64_t>(tag));
    return SplitMix64(k);
  }

  static SplitMix64 keyed(std::uint64_t seed, StreamTag tag,
                          std::uint64_t index = 0) noexcept {
    return keyed(seed, std::string_view{}, index, tag);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dmap
