#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gdm/autodiff/rng.hpp"
#include "gdm/ehr/records.hpp"
#include "gdm/model/diffattn.hpp"
#include "gdm/model/embedding.hpp"
#include "gdm/model/graph_prior.hpp"
#include "gdm/model/params.hpp"

namespace gdm::model {

/// Optional modalities on top of diagnoses, procedures and medications.
struct ModalityConfig {
  bool use_gender = false;
  bool use_age = false;
  bool use_labs = false;

  /// "-" or "base" for none, otherwise any of the letters L, G, Y.
  static ModalityConfig parse(std::string_view name);
  /// Canonical name: "-", "G", "GY", "L", "LGY", ...
  std::string name() const;

  bool operator==(const ModalityConfig&) const = default;
};

struct ModelConfig {
  std::size_t d = 64;
  std::size_t n_heads = 8;
  AttnVariant attention = AttnVariant::kDualV2;
  bool graph_bias = true;
  double lambda_graph = 0.1;
  ModalityConfig modality;
  double dropout = 0.7;
  double causal_eta = 1.0;
  std::size_t n_diag = 0;
  std::size_t n_proc = 0;
  std::size_t n_med = 0;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::size_t query_width() const;
  std::size_t repr_width() const;
};

struct GruParams {
  Tensor w_z, w_r, w_n;  // input maps, d x d
  Tensor u_z, u_r, u_n;  // hidden maps, d x d
  Tensor b_z, b_r, b_n;  // 1 x d

  static GruParams init(std::size_t d, const Rng& rng, const std::string& prefix);
  void append_to(NamedParams& out, const std::string& prefix) const;
};

struct GruResult {
  std::vector<Tensor> outputs;  // one 1 x d row per step
  Tensor final;
};

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);
/// h0 undefined means zeros. Requires at least one input.
GruResult gru_sequence(std::span<const Tensor> inputs, const GruParams& p, const Tensor& h0 = Tensor{});

struct ModelParams {
  Tensor diag_table, proc_table, med_table;
  Tensor gender_table;    // 2 x d
  Tensor age_projection;  // 1 x d
  Tensor lab_projection;  // 2 x d
  Tensor refine_diag, refine_proc, refine_med;
  GruParams gru_diag, gru_proc, gru_med, gru_lab;
  DiffAttnParams intra_diag, intra_proc, inter;
  Tensor query_w, query_b;
  Tensor out_w, out_b;
};

/// Fixed graphs the model reads but never trains.
struct ModelKnowledge {
  ehr::DdiGraph ddi;
  ehr::CausalEffectMatrices causal;
  HomoGraph diag_graph, proc_graph, med_graph;

  static ModelKnowledge build(ehr::DdiGraph ddi, ehr::CausalEffectMatrices causal);
};

class Model {
 public:
  Model(ModelConfig config, ModelKnowledge knowledge, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }
  const ModelKnowledge& knowledge() const { return knowledge_; }

  /// Every trainable tensor in a fixed order with stable names.
  NamedParams named_params() const;

 private:
  ModelConfig config_;
  ModelKnowledge knowledge_;
  ModelParams params_;
};

/// Sum of the (med -> diag) and (med -> proc) single-key attention outputs.
/// `bias` (1 x 1, optional) is added to both calls.
Tensor intra_visit_attention(const Tensor& h_med, const Tensor& h_diag, const Tensor& h_proc,
                             const DiffAttnParams& diag_params, const DiffAttnParams& proc_params,
                             const Tensor& bias = Tensor{});

/// GRU outputs of one visit; `lab` is undefined without labs.
struct VisitStates {
  Tensor diag, proc, med, lab;
};

struct QueryKv {
  Tensor q_input;  // 1 x query_width, before projection
  Tensor q_visit;  // 1 x d
  Tensor kv;       // L_kv x d
  std::vector<KvSlot> layout;
};

/// `history` holds the states of visits before the current one, oldest first.
QueryKv build_query_kv(std::span<const VisitStates> history, const VisitStates& current, const Tensor& h_med,
                       const DemographicVectors& demo, const Tensor& h_lab, const ModalityConfig& modality,
                       const Tensor& query_w, const Tensor& query_b);

/// Single-query attention over the historical context; `bias` optional.
Tensor inter_visit_attention(const Tensor& q_visit, const Tensor& kv, const Tensor& bias,
                             const DiffAttnParams& params, AttentionTrace* trace = nullptr);

struct AggregateInputs {
  VisitStates finals;
  DemographicVectors demo;
  Tensor o_intra, o_inter;
  Tensor last_diag, last_proc, last_med, last_lab;
};

/// Fixed-order concatenation, then dropout when `training`.
Tensor aggregate_patient(const AggregateInputs& in, const ModalityConfig& modality, double dropout, Rng* rng,
                         bool training);

/// relu(r) * W + b.
Tensor predict_logits(const Tensor& r, const Tensor& out_w, const Tensor& out_b);

/// z_m + eta * (max_d C_D[d, m] + max_p C_P[p, m]).
Tensor causal_review(const Tensor& z, std::span<const std::size_t> diags, std::span<const std::size_t> procs,
                     const ehr::CausalEffectMatrices& causal, double eta);

struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;
  /// Record attention traces, the kv layout and the bias of every visit.
  bool keep_trace = false;
};

struct VisitForward {
  Tensor logits;  // 1 x n_med, after causal review
  std::vector<double> probabilities;
  std::vector<KvSlot> layout;
  InterVisitBias bias;
  AttentionTrace inter_trace;
};

/// Predictions for every visit. Visit t reads diagnoses, procedures, labs and
/// demographics of visits <= t and medications of visits < t only.
std::vector<VisitForward> forward_patient(const Model& model, const ehr::EncodedPatient& patient,
                                          const ForwardOptions& options = {});

/// Probabilities at 1-based visit `t`, computed from the first t visits only.
std::vector<double> model_forward(const Model& model, const ehr::EncodedPatient& patient, std::size_t t);

}  // namespace gdm::model
