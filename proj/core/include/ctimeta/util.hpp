#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctimeta {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Collapses runs of whitespace to single spaces and trims the ends.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

// SHA-256 of the given bytes as lowercase hex.
std::string sha256_hex(std::string_view bytes);

bool is_lower_hex(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Deterministic PRNG wrapper. Bounded draws are built on the raw mt19937_64
// word sequence (pinned by the standard), so results are identical across
// standard library implementations for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t word() { return eng_(); }

  // Uniform in [0, n); n must be positive. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Uniform in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi);

  double unit();  // [0, 1)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    if (v.empty()) throw std::invalid_argument("pick from empty vector");
    return v[static_cast<std::size_t>(below(v.size()))];
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ctimeta
