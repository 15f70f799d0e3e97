#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qframe {

// splitmix64, used to derive independent substream seeds from one root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Substream k of a root seed. Documented scheme: seed_k = splitmix64(root ^ (k+1)*golden).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t k) {
  return splitmix64(root ^ ((k + 1) * 0x9E3779B97F4A7C15ULL));
}

// Seeded random stream with hand-rolled distributions so that results are
// reproducible across standard library implementations (std:: distributions
// are implementation-defined; the mt19937_64 engine itself is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  int uniform_bit() { return static_cast<int>(engine_() >> 63); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // Standard normal via the polar method (no state carried between calls).
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  double gauss(double mean, double sigma) { return mean + sigma * gauss(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qframe
