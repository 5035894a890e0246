#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sprint {

uint64_t fnv1a64(const void* data, std::size_t size);
uint64_t fnv1a64(std::string_view text);
std::string to_hex(uint64_t value);

uint64_t splitmix64(uint64_t state);

// Derives an independent 64-bit sub-seed for a named role from the run seed.
// All randomness in the project flows from one seed through this split.
uint64_t derive_seed(uint64_t seed, std::string_view role);

// Deterministic random stream. std::mt19937_64 supplies the bits (the engine
// is fully specified by the standard); the distribution transforms live here
// because the standard library's distributions are not portable bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng for_role(uint64_t seed, std::string_view role) {
    return Rng(derive_seed(seed, role));
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Marsaglia's polar method; the spare value is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, bound), rejection-sampled so every value is
  // equally likely.
  int uniform_int(int bound);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(values[i - 1], values[j]);
    }
  }

  // Draws `count` distinct elements from `pool`, in draw order.
  std::vector<int> sample_without_replacement(const std::vector<int>& pool, int count);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sprint
