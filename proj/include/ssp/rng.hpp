#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ssp {

/// Deterministic splitmix64 generator. All randomness in the project flows
/// through this class so that a single seed fixes every output bit-exactly,
/// independent of platform or standard-library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller (no state caching, one fresh pair per call).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derive an independent stream; forking does not disturb this generator's
  /// own sequence beyond one draw.
  Rng fork(uint64_t stream_id) {
    return Rng(next_u64() ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
  }

 private:
  uint64_t state_;
};

}  // namespace ssp
