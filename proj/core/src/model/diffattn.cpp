#include "gdm/model/diffattn.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gdm/autodiff/ops.hpp"

namespace gdm::model {

using ad::TensorError;

std::string_view variant_name(AttnVariant v) { return v == AttnVariant::kV1 ? "v1" : "dual_v2"; }

AttnVariant parse_variant(std::string_view s) {
  if (s == "v1") return AttnVariant::kV1;
  if (s == "dual_v2" || s == "v2") return AttnVariant::kDualV2;
  throw TensorError(fmt::format("unknown attention variant '{}' (expected v1 or dual_v2)", s));
}

DiffAttnParams DiffAttnParams::init(std::size_t d, std::size_t n_heads, AttnVariant variant, double lambda_graph,
                                    const Rng& rng, const std::string& prefix) {
  if (n_heads == 0 || d == 0 || d % n_heads != 0) {
    throw TensorError(fmt::format("diffattn: d = {} is not divisible by H = {}", d, n_heads));
  }
  DiffAttnParams p;
  p.d = d;
  p.n_heads = n_heads;
  p.variant = variant;
  p.lambda_graph = lambda_graph;
  p.w_q = linear_weight(rng, prefix + ".w_q", d, 2 * d);
  p.w_k = linear_weight(rng, prefix + ".w_k", d, d);
  p.w_v = linear_weight(rng, prefix + ".w_v", d, d);
  p.w_o = linear_weight(rng, prefix + ".w_o", d, d);
  if (variant == AttnVariant::kDualV2) {
    p.w_lambda = linear_weight(rng, prefix + ".w_lambda", d, n_heads);
  } else {
    p.v1_gates = Tensor::full({1, n_heads}, 0.5, true);
  }
  return p;
}

void DiffAttnParams::append_to(NamedParams& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".w_q", w_q);
  out.emplace_back(prefix + ".w_k", w_k);
  out.emplace_back(prefix + ".w_v", w_v);
  if (w_lambda.defined()) out.emplace_back(prefix + ".w_lambda", w_lambda);
  if (v1_gates.defined()) out.emplace_back(prefix + ".v1_gates", v1_gates);
  out.emplace_back(prefix + ".w_o", w_o);
}

Tensor lambda_gate(const Tensor& x, const Tensor& w_lambda) { return ad::sigmoid(ad::matmul(x, w_lambda)); }

Tensor diffattn_with_gates(const Tensor& x, const Tensor& y, const Tensor& bias, const Tensor& gates,
                           const DiffAttnParams& p, AttentionTrace* trace) {
  const char* stage = "input";
  try {
    const std::size_t h = p.n_heads;
    const std::size_t dh = p.head_dim();
    if (x.rank() != 2 || y.rank() != 2 || x.cols() != p.d || y.cols() != p.d) {
      throw TensorError(fmt::format("expected X and Y with {} columns, got {} and {}", p.d, ad::shape_str(x.shape()),
                                    ad::shape_str(y.shape())));
    }
    const std::size_t lq = x.rows();
    const std::size_t lkv = y.rows();
    if (bias.defined() && bias.shape() != ad::Shape{lq, lkv}) {
      throw TensorError(fmt::format("bias shape {} does not match [{}, {}]", ad::shape_str(bias.shape()), lq, lkv));
    }
    if (gates.shape() != ad::Shape{lq, h}) {
      throw TensorError(fmt::format("gate shape {} does not match [{}, {}]", ad::shape_str(gates.shape()), lq, h));
    }
    if (trace) {
      trace->n_query = lq;
      trace->n_kv = lkv;
      trace->weights.clear();
      trace->gates.assign(gates.data().begin(), gates.data().end());
    }

    stage = "projection";
    auto q = ad::matmul(x, p.w_q);
    auto k = ad::matmul(y, p.w_k);
    auto v = ad::matmul(y, p.w_v);
    Tensor scaled_bias;
    if (bias.defined()) scaled_bias = ad::scale(bias, p.lambda_graph);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> pairs;
    pairs.reserve(h);
    for (std::size_t pair = 0; pair < h; ++pair) {
      // Both query heads of the pair read the same key/value head.
      auto kh = ad::slice_cols(k, pair * dh, (pair + 1) * dh);
      auto vh = ad::slice_cols(v, pair * dh, (pair + 1) * dh);
      auto kt = ad::transpose(kh);
      Tensor ctx[2];
      for (std::size_t half = 0; half < 2; ++half) {
        const std::size_t head = 2 * pair + half;
        stage = "scores";
        auto s = ad::scale(ad::matmul(ad::slice_cols(q, head * dh, (head + 1) * dh), kt), inv_sqrt);
        if (scaled_bias.defined()) s = ad::add(s, scaled_bias);
        stage = "softmax";
        auto a = ad::softmax_rows(s);
        if (trace) trace->weights.emplace_back(a.data().begin(), a.data().end());
        stage = "context";
        ctx[half] = ad::matmul(a, vh);
      }
      stage = "differential";
      auto g = ad::expand(ad::slice_cols(gates, pair, pair + 1), {lq, dh});
      pairs.push_back(ad::sub(ctx[0], ad::mul(g, ctx[1])));
    }
    stage = "output";
    return ad::matmul(ad::concat_cols(pairs), p.w_o);
  } catch (const TensorError& e) {
    throw TensorError(fmt::format("diffattn stage '{}': {}", stage, e.what()));
  }
}

Tensor diffattn_v2(const Tensor& x, const Tensor& y, const Tensor& bias, const DiffAttnParams& p,
                   AttentionTrace* trace) {
  if (!p.w_lambda.defined()) throw TensorError("diffattn_v2: parameters carry no W_lambda");
  Tensor gates;
  try {
    gates = lambda_gate(x, p.w_lambda);
  } catch (const TensorError& e) {
    throw TensorError(fmt::format("diffattn stage 'gate': {}", e.what()));
  }
  return diffattn_with_gates(x, y, bias, gates, p, trace);
}

Tensor diffattn_v1(const Tensor& x, const Tensor& y, const DiffAttnParams& p, AttentionTrace* trace) {
  if (!p.v1_gates.defined()) throw TensorError("diffattn_v1: parameters carry no scalar gates");
  auto gates = x.rows() == 1 ? p.v1_gates : ad::expand(p.v1_gates, {x.rows(), p.n_heads});
  return diffattn_with_gates(x, y, Tensor{}, gates, p, trace);
}

Tensor diffattn(const Tensor& x, const Tensor& y, const Tensor& bias, const DiffAttnParams& p,
                AttentionTrace* trace) {
  return p.variant == AttnVariant::kV1 ? diffattn_v1(x, y, p, trace) : diffattn_v2(x, y, bias, p, trace);
}

}  // namespace gdm::model
