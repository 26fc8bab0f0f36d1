#include "gdm/autodiff/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gdm {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6764'6d5f'726e'6700ULL)) {}

Rng Rng::split(std::string_view name) const { return Rng(mix64(key_ ^ fnv1a64(name)), 0); }

Rng Rng::split(std::uint64_t index) const {
  return Rng(mix64(key_ + mix64(index ^ 0xA5A5A5A5A5A5A5A5ULL)), 0);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t n = counter_++;
  return mix64(key_ ^ mix64(n));
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

int Rng::poisson(double mean) {
  if (mean < 0.0) throw std::invalid_argument("Rng::poisson: negative mean");
  const double l = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > l);
  return k - 1;
}

}  // namespace gdm
