#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gdm/model/params.hpp"

namespace gdm::model {

enum class AttnVariant { kV1, kDualV2 };

std::string_view variant_name(AttnVariant v);
/// Accepts "v1" and "dual_v2".
AttnVariant parse_variant(std::string_view s);

/// Weights of one differential attention block.
///
/// Queries live in 2H heads of width d/H, keys and values in H heads that are
/// shared by each (even, odd) query-head pair. v2 gates are sigmoid(X W_lambda);
/// v1 uses one learnable scalar per head pair.
struct DiffAttnParams {
  std::size_t d = 0;
  std::size_t n_heads = 0;
  AttnVariant variant = AttnVariant::kDualV2;
  /// Fixed scale on the additive pre-softmax bias.
  double lambda_graph = 0.1;

  Tensor w_q;       // d x 2d
  Tensor w_k;       // d x d
  Tensor w_v;       // d x d
  Tensor w_lambda;  // d x H, v2 only
  Tensor v1_gates;  // 1 x H, v1 only
  Tensor w_o;       // d x d

  std::size_t head_dim() const { return d / n_heads; }

  /// Throws TensorError when d is not divisible by n_heads.
  static DiffAttnParams init(std::size_t d, std::size_t n_heads, AttnVariant variant, double lambda_graph,
                             const Rng& rng, const std::string& prefix);

  void append_to(NamedParams& out, const std::string& prefix) const;
};

/// Per-call attention maps for inspection.
struct AttentionTrace {
  std::size_t n_query = 0;
  std::size_t n_kv = 0;
  /// 2H maps of n_query x n_kv, row-major.
  std::vector<std::vector<double>> weights;
  /// n_query x H.
  std::vector<double> gates;
};

/// sigmoid(X * W_lambda), L_q x H.
Tensor lambda_gate(const Tensor& x, const Tensor& w_lambda);

/// `bias` may be undefined (no bias); otherwise a constant L_q x L_kv tensor.
Tensor diffattn_v2(const Tensor& x, const Tensor& y, const Tensor& bias, const DiffAttnParams& p,
                   AttentionTrace* trace = nullptr);

/// Scalar-gate variant; no graph bias.
Tensor diffattn_v1(const Tensor& x, const Tensor& y, const DiffAttnParams& p, AttentionTrace* trace = nullptr);

/// Kernel with externally supplied L_q x H gates.
Tensor diffattn_with_gates(const Tensor& x, const Tensor& y, const Tensor& bias, const Tensor& gates,
                           const DiffAttnParams& p, AttentionTrace* trace = nullptr);

/// Dispatches on p.variant; v1 ignores `bias`.
Tensor diffattn(const Tensor& x, const Tensor& y, const Tensor& bias, const DiffAttnParams& p,
                AttentionTrace* trace = nullptr);

}  // namespace gdm::model
