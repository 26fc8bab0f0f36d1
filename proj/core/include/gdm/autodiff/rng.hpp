#pragma once

#include <cstdint>
#include <string_view>

namespace gdm {

/// Counter-based splittable generator.
///
/// A stream is identified by a 64-bit key; the n-th draw is a pure function of
/// (key, n). Child streams are derived by hashing a name or index into the
/// parent key, so independent consumers (init, dropout, shuffling, bootstrap)
/// never share state and results do not depend on draw interleaving.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::string_view name) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);
  /// Knuth's multiplication method; fine for the small means used here.
  int poisson(double mean);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace gdm
