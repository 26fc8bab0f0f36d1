#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gdm/autodiff/tensor.hpp"

namespace gdm::ad {

// Matrix ops expect rank-2 tensors; a row vector is 1 x n.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise ops take equal shapes, or one operand whose leading axis is 1
// (broadcast over rows). Any other broadcast goes through expand().
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_constant(const Tensor& a, std::span<const double> c);

/// Broadcasts unit axes of `a` up to `shape` (same rank).
Tensor expand(const Tensor& a, const Shape& shape);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

/// Splits the columns into `n_heads` equal blocks and repeats each block
/// `repeats` times in place: [k0, k1] -> [k0, k0, k1, k1].
Tensor repeat_interleave_cols(const Tensor& a, std::size_t n_heads, std::size_t repeats);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_rows(const Tensor& a);
Tensor mean_rows(const Tensor& a);
Tensor square_sum(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

/// Row gather from a rank-2 table; indices may repeat.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

/// Mean binary cross-entropy computed from logits with the log-sum-exp form.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets);

}  // namespace gdm::ad
