#pragma once

#include <functional>
#include <span>

#include "gdm/autodiff/tensor.hpp"

namespace gdm::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares the reverse-mode gradient of `f` with central differences.
///
/// `f` rebuilds its graph on every call and reads the current values of the
/// leaves in `inputs`. Each coordinate is probed in place and restored. The
/// error per coordinate is |a - n| / (|a| + |n| + 1e-12). A function that
/// does not reproduce its own value bit-exactly is rejected.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double h);

/// Single-input convenience form.
double grad_check(const std::function<Tensor()>& f, Tensor& x, double h);

}  // namespace gdm::ad
