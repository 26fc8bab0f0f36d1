#include "gdm/autodiff/grad_check.hpp"

#include <cmath>

#include <fmt/format.h>

namespace gdm::ad {

GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double h) {
  if (!(h >= 1e-8 && h <= 1e-4)) throw TensorError(fmt::format("grad_check: step {} outside [1e-8, 1e-4]", h));
  for (auto& x : inputs) {
    if (!x.requires_grad() || !x.is_leaf()) throw TensorError("grad_check: inputs must be requires_grad leaves");
    x.zero_grad();
  }

  const Tensor base = f();
  const double f0 = base.item();
  if (f().item() != f0) throw TensorError("grad_check: function is not deterministic");
  backward(base);

  GradCheckResult res;
  std::size_t flat = 0;
  for (auto& x : inputs) {
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) analytic.assign(x.grad().begin(), x.grad().end());
    auto vals = x.mutable_data();
    for (std::size_t i = 0; i < vals.size(); ++i, ++flat) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = f().item();
      vals[i] = orig - h;
      const double fm = f().item();
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
      if (err > res.max_rel_error || flat == 0) {
        res.max_rel_error = err;
        res.worst_index = flat;
        res.analytic_at_worst = analytic[i];
        res.numeric_at_worst = numeric;
      }
    }
    x.zero_grad();
  }
  return res;
}

double grad_check(const std::function<Tensor()>& f, Tensor& x, double h) {
  return grad_check(f, std::span<Tensor>(&x, 1), h).max_rel_error;
}

}  // namespace gdm::ad
