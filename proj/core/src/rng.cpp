#include "crpt/rng.hpp"

#include <cmath>

namespace crpt {

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller on two fresh uniforms; u1 is kept away from zero.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  Rng mixer(root ^ hash_label(label));
  mixer.next_u64();
  return mixer.next_u64();
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index) {
  Rng mixer(derive_seed(root, label) ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  return mixer.next_u64();
}

}  // namespace crpt
