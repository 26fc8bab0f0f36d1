#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdm/autodiff/rng.hpp"
#include "gdm/autodiff/tensor.hpp"

namespace gdm::ad {

struct AdamState {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update over `params` using their accumulated
/// gradients (a parameter without a gradient is treated as zero-gradient).
/// Moments are allocated on the first call; gradients are cleared afterwards.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Raw-array form used by tests and the optimizer itself.
void adam_update(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                 std::vector<double>& v, const AdamState& state);

/// Inverted dropout. Training mode zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate); evaluation mode is identity.
Tensor dropout_apply(const Tensor& x, double rate, Rng& rng, bool training);

}  // namespace gdm::ad
