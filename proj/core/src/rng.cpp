#include "sprint/rng.hpp"

#include <cmath>
#include <string>

#include "sprint/errors.hpp"

namespace sprint {

uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t hash = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

uint64_t fnv1a64(std::string_view text) { return fnv1a64(text.data(), text.size()); }

std::string to_hex(uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

uint64_t splitmix64(uint64_t state) {
  uint64_t z = state + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t seed, std::string_view role) {
  return splitmix64(splitmix64(seed ^ fnv1a64(role)));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

int Rng::uniform_int(int bound) {
  if (bound <= 0) throw usage_error("uniform_int bound must be positive");
  uint64_t b = static_cast<uint64_t>(bound);
  uint64_t limit = UINT64_MAX - UINT64_MAX % b;
  uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return static_cast<int>(r % b);
}

std::vector<int> Rng::sample_without_replacement(const std::vector<int>& pool, int count) {
  if (count < 0 || static_cast<std::size_t>(count) > pool.size()) {
    throw usage_error("sample_without_replacement: count out of range");
  }
  std::vector<int> scratch = pool;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t remaining = scratch.size();
  for (int k = 0; k < count; ++k) {
    std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(remaining)));
    out.push_back(scratch[j]);
    scratch[j] = scratch[remaining - 1];
    --remaining;
  }
  return out;
}

}  // namespace sprint
