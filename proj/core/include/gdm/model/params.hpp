#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gdm/autodiff/rng.hpp"
#include "gdm/autodiff/tensor.hpp"

namespace gdm::model {

using ad::Shape;
using ad::Tensor;

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Trainable tensor drawn uniformly from [-bound, bound] on the stream
/// `root.split(name)`, so a parameter's initial value depends only on the seed
/// and its name.
Tensor uniform_param(const Rng& root, const std::string& name, Shape shape, double bound);

/// n_in x n_out weight with bound 1/sqrt(n_in).
Tensor linear_weight(const Rng& root, const std::string& name, std::size_t n_in, std::size_t n_out);

/// Trainable 1 x n zeros.
Tensor zero_bias(std::size_t n);

/// Sum of squares over all entries (plain doubles, no graph).
double squared_norm(const NamedParams& params);

}  // namespace gdm::model
