#pragma once

// Text utilities shared by the dependency extractor and the assembler:
// tokenization, the fixed stopword list, FNV-1a content hashing and a
// portable seeded generator.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kforest {

// Lowercases, splits on anything that is not an ASCII letter or digit, drops
// stopwords and tokens shorter than two characters. Bytes >= 0x80 are kept as
// word characters so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

bool is_stopword(std::string_view token);

// The 50-word English stopword list, in the order it is shipped.
const std::vector<std::string_view>& stopwords();

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Lowercase, zero-padded, 16 hex digits.
std::string hex16(std::uint64_t value);

// Fragment id: the 16-hex-digit FNV-1a hash of the UTF-8 text.
std::string fragment_id(std::string_view text);

// Topic slug: lowercase ASCII alphanumerics with single hyphens between runs.
std::string slugify(std::string_view label);

bool is_valid_slug(std::string_view id) noexcept;

std::string_view trim(std::string_view s) noexcept;

// splitmix64 stream. Used instead of <random> distributions because those
// are implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace kforest
