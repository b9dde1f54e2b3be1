#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mvlatent::nn {

/// Deterministic random source. All randomness in the toolkit flows from a
/// single master seed through named sub-streams (see derive_seed), so any
/// component can be re-seeded independently and runs are reproducible
/// bit-for-bit. Normal draws use Box-Muller on top of mt19937_64 rather than
/// std::normal_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Single N(0,1) draw. Consumes two uniforms; the sine branch is discarded
  /// so the stream position never depends on call history.
  double normal();

  /// Exactly n calls to normal(): bulk and scalar callers consume the same
  /// stream positions.
  void fill_normal(double* out, std::size_t n);

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// Stable seed derivation: master seed + stream name (+ salt) -> sub-seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t salt = 0);

inline Rng derive_rng(std::uint64_t master, std::string_view stream,
                      std::uint64_t salt = 0) {
  return Rng(derive_seed(master, stream, salt));
}

/// FNV-1a 64-bit hash of a byte buffer; used for corpus fingerprints.
std::uint64_t fnv1a64(const void* bytes, std::size_t n);

}  // namespace mvlatent::nn
