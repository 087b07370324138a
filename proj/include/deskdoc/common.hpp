#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace deskdoc {

// Bad or inconsistent input data (corpus files, task/annotation mismatches).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite numbers are required (losses, gradients).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or argument contract violations inside the in-process API.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using Rng = std::mt19937_64;

// Sampling helpers with pinned algorithms. std:: distributions are
// implementation-defined, which would make seeded runs differ between
// standard libraries.
inline std::uint64_t uniform_u64(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ShapeError("uniform_u64: n must be positive");
  std::uint64_t threshold = (~std::uint64_t(0) - n + 1) % n;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive range
  if (hi < lo) throw ShapeError("uniform_int: empty range");
  return lo + static_cast<int>(uniform_u64(rng, std::uint64_t(hi - lo) + 1));
}

inline double uniform_real(Rng& rng) {  // [0, 1) with 53 random bits
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal(Rng& rng) {  // Box-Muller, one sample per call
  double u1 = uniform_real(rng);
  double u2 = uniform_real(rng);
  while (u1 <= 0.0) u1 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double truncated_normal(Rng& rng, double stddev, double bound = 2.0) {
  for (;;) {
    double z = normal(rng);
    if (std::abs(z) <= bound) return z * stddev;
  }
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {  // Fisher-Yates
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_u64(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

// Stable per-document seed derived from a run seed and a document id.
inline std::uint64_t derive_seed(std::uint64_t run_seed, const std::string& doc_id) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : doc_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h ^= run_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace deskdoc
