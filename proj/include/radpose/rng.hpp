#pragma once

#include <cstdint>
#include <random>

namespace radpose {

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the uniform and normal transforms are done here
// rather than through <random> distributions, which are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Independent child stream keyed by `stream`; does not advance this one.
  Rng derive(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer, used to derive well-mixed seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace radpose
