#include "gdm/model/params.hpp"

#include <cmath>

namespace gdm::model {

Tensor uniform_param(const Rng& root, const std::string& name, Shape shape, double bound) {
  auto rng = root.split(name);
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor linear_weight(const Rng& root, const std::string& name, std::size_t n_in, std::size_t n_out) {
  return uniform_param(root, name, {n_in, n_out}, 1.0 / std::sqrt(static_cast<double>(n_in)));
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({1, n}, true); }

double squared_norm(const NamedParams& params) {
  double s = 0.0;
  for (const auto& [name, t] : params)
    for (double x : t.data()) s += x * x;
  return s;
}

}  // namespace gdm::model
