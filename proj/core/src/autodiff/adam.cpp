#include "gdm/autodiff/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gdm/autodiff/ops.hpp"

namespace gdm::ad {

void adam_update(std::span<double> param, std::span<const double> grad, std::vector<double>& m, std::vector<double>& v,
                 const AdamState& state) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw TensorError(fmt::format("adam_update: size mismatch (param {}, grad {}, moments {}/{})", param.size(),
                                  grad.size(), m.size(), v.size()));
  }
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    param[i] -= state.learning_rate * mh / (std::sqrt(vh) + state.epsilon);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw TensorError(fmt::format("adam_step: state tracks {} parameters, got {}", state.first_moment.size(),
                                  params.size()));
  }
  ++state.step_count;
  std::vector<double> zeros;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    std::span<const double> g;
    if (p.has_grad()) {
      g = p.grad();
    } else {
      zeros.assign(p.numel(), 0.0);
      g = zeros;
    }
    adam_update(p.mutable_data(), g, state.first_moment[k], state.second_moment[k], state);
    p.zero_grad();
  }
}

Tensor dropout_apply(const Tensor& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw TensorError(fmt::format("dropout: rate {} outside [0, 1)", rate));
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace gdm::ad
