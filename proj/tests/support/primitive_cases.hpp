#pragma once

// One graph per differentiable primitive, for central-difference checks.

#include <functional>
#include <vector>

#include "gdm/autodiff/ops.hpp"
#include "gdm/autodiff/rng.hpp"

namespace gdm::testing {

inline ad::Tensor leaf_tensor(Rng& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::from(std::move(shape), std::move(v), true);
}

/// Values kept at least `margin` away from zero, for kinked ops.
inline ad::Tensor away_from_zero(Rng& rng, ad::Shape shape, double margin = 0.05) {
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(margin, 1.0);
    x = rng.bernoulli(0.5) ? m : -m;
  }
  return ad::Tensor::from(std::move(shape), std::move(v), true);
}

/// Random weights reduce an op output to a scalar with a non-trivial gradient.
inline ad::Tensor weighted_sum(const ad::Tensor& t, std::uint64_t salt) {
  Rng rng(salt);
  std::vector<double> w(t.numel());
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  return ad::sum(ad::mul(t, ad::Tensor::from(t.shape(), w)));
}

struct PrimitiveCase {
  const char* name;
  std::function<std::function<ad::Tensor()>(Rng&, std::vector<ad::Tensor>&)> build;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  using namespace gdm::ad;
  using ad::tanh;
  return {
      PrimitiveCase{"matmul",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {3, 4});
                      auto b = leaf_tensor(rng, {4, 2});
                      in = {a, b};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(matmul(a, b), 1); });
                    }},
      PrimitiveCase{"transpose",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {3, 2});
                      in = {a};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(transpose(a), 2); });
                    }},
      PrimitiveCase{"add_broadcast",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {3, 4});
                      auto b = leaf_tensor(rng, {1, 4});
                      in = {a, b};
                      return std::function<ad::Tensor()>(
                          [=] { return add(weighted_sum(add(a, b), 3), weighted_sum(add(b, a), 4)); });
                    }},
      PrimitiveCase{"sub_mul",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {2, 3});
                      auto b = leaf_tensor(rng, {2, 3});
                      auto c = leaf_tensor(rng, {1, 3});
                      in = {a, b, c};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(mul(sub(a, b), c), 5); });
                    }},
      PrimitiveCase{"scale_add_constant",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {2, 2});
                      in = {a};
                      std::vector<double> c{0.5, -1.0, 2.0, 0.25};
                      return std::function<ad::Tensor()>(
                          [=] { return weighted_sum(mul(a, add_constant(scale(a, -1.7), c)), 6); });
                    }},
      PrimitiveCase{"expand",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {3, 1});
                      in = {a};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(expand(a, {3, 4}), 7); });
                    }},
      PrimitiveCase{"concat",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {2, 3});
                      auto b = leaf_tensor(rng, {2, 1});
                      auto c = leaf_tensor(rng, {1, 4});
                      in = {a, b, c};
                      return std::function<ad::Tensor()>([=] {
                        std::vector<Tensor> cols{a, b};
                        auto ab = concat_cols(cols);
                        std::vector<Tensor> rows{ab, c};
                        return weighted_sum(concat_rows(rows), 8);
                      });
                    }},
      PrimitiveCase{"slice_repeat",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {2, 6});
                      in = {a};
                      return std::function<ad::Tensor()>([=] {
                        return add(weighted_sum(slice_cols(a, 1, 4), 9),
                                   weighted_sum(repeat_interleave_cols(a, 3, 2), 10));
                      });
                    }},
      PrimitiveCase{"reductions",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {3, 4});
                      in = {a};
                      return std::function<ad::Tensor()>([=] {
                        return add(add(mul(sum(a), mean(a)), weighted_sum(sum_rows(a), 11)),
                                   add(weighted_sum(mean_rows(a), 12), square_sum(a)));
                      });
                    }},
      PrimitiveCase{"sigmoid_tanh",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {2, 3}, -3, 3);
                      in = {a};
                      return std::function<ad::Tensor()>(
                          [=] { return add(weighted_sum(sigmoid(a), 13), weighted_sum(tanh(a), 14)); });
                    }},
      PrimitiveCase{"relu",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = away_from_zero(rng, {3, 3});
                      in = {a};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(relu(a), 15); });
                    }},
      PrimitiveCase{"softmax",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto a = leaf_tensor(rng, {3, 4}, -2, 2);
                      in = {a};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(softmax_rows(a), 16); });
                    }},
      PrimitiveCase{"gather_rows",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto t = leaf_tensor(rng, {5, 3});
                      in = {t};
                      std::vector<std::size_t> idx{4, 0, 4, 2};
                      return std::function<ad::Tensor()>([=] { return weighted_sum(gather_rows(t, idx), 17); });
                    }},
      PrimitiveCase{"bce_with_logits",
                    [](Rng& rng, std::vector<Tensor>& in) {
                      auto z = leaf_tensor(rng, {1, 6}, -4, 4);
                      in = {z};
                      std::vector<double> y{1, 0, 0, 1, 1, 0};
                      return std::function<ad::Tensor()>([=] { return bce_with_logits(z, y); });
                    }}
  };
}

}  // namespace gdm::testing
