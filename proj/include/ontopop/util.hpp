#pragma once
// Shared utilities: deterministic RNG, hashing, UTF-8 transcoding, text and
// file helpers. Everything here is platform-independent so that seeded runs
// reproduce bit-for-bit.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ontopop {

// SplitMix64. Small state, passes BigCrush, identical output everywhere.
// All seeded randomness in the library flows through this.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), n > 0
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller.
  double gaussian();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

uint64_t fnv1a64(std::string_view s);

// Per-stage seed derivation: base seed plus the stage-name hash, wrapping.
inline uint64_t derive_seed(uint64_t base, std::string_view stage) {
  return base + fnv1a64(stage);
}

// UTF-8 <-> Unicode scalar values. Invalid byte sequences decode to U+FFFD,
// one replacement per bad byte, so offsets stay well defined.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

// ASCII-only case fold; non-ASCII scalars pass through unchanged.
std::string fold_case(std::string_view s);

std::string trim(std::string_view s);
// Collapse runs of whitespace to single spaces and trim the ends.
std::string normalize_ws(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_on(std::string_view s, char sep);

// Shortest round-trip decimal form (via std::to_chars).
std::string format_double(double x);

std::string read_file(const std::string& path);              // throws IoError
void write_file(const std::string& path, std::string_view data);

}  // namespace ontopop
