#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace convkb {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// mt19937_64 engine (bit-identical everywhere by the standard) with
// hand-rolled transforms; the std distributions are not portable across
// library implementations, which would break checkpoint reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  // Independent stream for (seed, stream, index), e.g. per-epoch shuffling.
  static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return Rng(splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc908ULL) + stream) + index);
  }

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n); modulo bias is ~n/2^64, irrelevant at vocabulary scale
  std::int32_t uniform_int(std::int32_t n) {
    return static_cast<std::int32_t>(gen_() % static_cast<std::uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, cosine branch only
  double normal(double mean, double sigma) {
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + sigma * z;
  }

  // Resample outside mean +/- 2 sigma.
  double truncated_normal(double mean, double sigma) {
    for (;;) {
      const double x = normal(mean, sigma);
      if (std::abs(x - mean) <= 2.0 * sigma) return x;
    }
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace convkb
