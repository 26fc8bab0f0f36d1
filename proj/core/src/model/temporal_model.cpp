#include "gdm/model/temporal_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gdm/autodiff/adam.hpp"
#include "gdm/autodiff/ops.hpp"

namespace gdm::model {

using ad::TensorError;

ModalityConfig ModalityConfig::parse(std::string_view name) {
  ModalityConfig m;
  if (name == "-" || name == "base" || name.empty()) return m;
  for (char c : name) {
    bool* flag = nullptr;
    switch (c) {
      case 'G': flag = &m.use_gender; break;
      case 'Y': flag = &m.use_age; break;
      case 'L': flag = &m.use_labs; break;
      default: break;
    }
    if (flag == nullptr || *flag) throw std::invalid_argument(fmt::format("invalid modality setting '{}'", name));
    *flag = true;
  }
  return m;
}

std::string ModalityConfig::name() const {
  std::string s;
  if (use_labs) s += 'L';
  if (use_gender) s += 'G';
  if (use_age) s += 'Y';
  return s.empty() ? "-" : s;
}

void ModelConfig::validate() const {
  if (d == 0 || n_heads == 0 || d % n_heads != 0) {
    throw std::invalid_argument(fmt::format("embedding dimension {} must be a positive multiple of heads {}", d, n_heads));
  }
  if (graph_bias && attention == AttnVariant::kV1) {
    throw std::invalid_argument("graph bias requires the dual_v2 attention variant");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument(fmt::format("dropout {} not in [0, 1)", dropout));
  if (!(causal_eta >= 0.0)) throw std::invalid_argument(fmt::format("causal eta {} must be >= 0", causal_eta));
  if (!std::isfinite(lambda_graph)) throw std::invalid_argument("lambda_graph must be finite");
  if (n_diag == 0 || n_proc == 0 || n_med == 0) throw std::invalid_argument("vocabulary sizes must be positive");
}

std::size_t ModelConfig::query_width() const {
  return d * (3 + modality.use_gender + modality.use_age + modality.use_labs);
}

std::size_t ModelConfig::repr_width() const {
  return d * (8 + modality.use_gender + modality.use_age + 2 * modality.use_labs);
}

GruParams GruParams::init(std::size_t d, const Rng& rng, const std::string& prefix) {
  GruParams p;
  p.w_z = linear_weight(rng, prefix + ".w_z", d, d);
  p.w_r = linear_weight(rng, prefix + ".w_r", d, d);
  p.w_n = linear_weight(rng, prefix + ".w_n", d, d);
  p.u_z = linear_weight(rng, prefix + ".u_z", d, d);
  p.u_r = linear_weight(rng, prefix + ".u_r", d, d);
  p.u_n = linear_weight(rng, prefix + ".u_n", d, d);
  p.b_z = zero_bias(d);
  p.b_r = zero_bias(d);
  p.b_n = zero_bias(d);
  return p;
}

void GruParams::append_to(NamedParams& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".w_z", w_z);
  out.emplace_back(prefix + ".w_r", w_r);
  out.emplace_back(prefix + ".w_n", w_n);
  out.emplace_back(prefix + ".u_z", u_z);
  out.emplace_back(prefix + ".u_r", u_r);
  out.emplace_back(prefix + ".u_n", u_n);
  out.emplace_back(prefix + ".b_z", b_z);
  out.emplace_back(prefix + ".b_r", b_r);
  out.emplace_back(prefix + ".b_n", b_n);
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  using namespace ad;
  auto z = sigmoid(add(add(matmul(x, p.w_z), matmul(h, p.u_z)), p.b_z));
  auto r = sigmoid(add(add(matmul(x, p.w_r), matmul(h, p.u_r)), p.b_r));
  auto n = ad::tanh(add(add(matmul(x, p.w_n), mul(r, matmul(h, p.u_n))), p.b_n));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return add(n, mul(z, sub(h, n)));
}

GruResult gru_sequence(std::span<const Tensor> inputs, const GruParams& p, const Tensor& h0) {
  if (inputs.empty()) throw TensorError("gru_sequence: needs at least one step");
  const std::size_t d = p.w_z.cols();
  GruResult out;
  Tensor h = h0.defined() ? h0 : Tensor::zeros({1, d});
  if (h.shape() != ad::Shape{1, d}) throw TensorError("gru_sequence: initial state must be " + ad::shape_str({1, d}));
  out.outputs.reserve(inputs.size());
  for (const auto& x : inputs) {
    if (x.shape() != ad::Shape{1, p.w_z.rows()}) {
      throw TensorError(fmt::format("gru_sequence: step input {} does not match [1, {}]", ad::shape_str(x.shape()),
                                    p.w_z.rows()));
    }
    h = gru_cell(x, h, p);
    out.outputs.push_back(h);
  }
  out.final = h;
  return out;
}

ModelKnowledge ModelKnowledge::build(ehr::DdiGraph ddi, ehr::CausalEffectMatrices causal) {
  ModelKnowledge k;
  k.diag_graph = HomoGraph::from_cosupport(causal.diag_to_med);
  k.proc_graph = HomoGraph::from_cosupport(causal.proc_to_med);
  k.med_graph = HomoGraph::from_ddi(ddi);
  k.ddi = std::move(ddi);
  k.causal = std::move(causal);
  return k;
}

Model::Model(ModelConfig config, ModelKnowledge knowledge, std::uint64_t seed)
    : config_(std::move(config)), knowledge_(std::move(knowledge)) {
  config_.validate();
  const auto& c = config_;
  if (knowledge_.ddi.size() != c.n_med || knowledge_.causal.diag_to_med.rows != c.n_diag ||
      knowledge_.causal.diag_to_med.cols != c.n_med || knowledge_.causal.proc_to_med.rows != c.n_proc ||
      knowledge_.causal.proc_to_med.cols != c.n_med) {
    throw std::invalid_argument(fmt::format(
        "knowledge graphs do not match vocabularies (diag {}, proc {}, med {}): ddi {}, causal {}x{} and {}x{}",
        c.n_diag, c.n_proc, c.n_med, knowledge_.ddi.size(), knowledge_.causal.diag_to_med.rows,
        knowledge_.causal.diag_to_med.cols, knowledge_.causal.proc_to_med.rows, knowledge_.causal.proc_to_med.cols));
  }
  const Rng root = Rng(seed).split("init");
  const double table_bound = 1.0 / std::sqrt(static_cast<double>(c.d));
  auto& p = params_;
  p.diag_table = uniform_param(root, "embed.diag", {c.n_diag, c.d}, table_bound);
  p.proc_table = uniform_param(root, "embed.proc", {c.n_proc, c.d}, table_bound);
  p.med_table = uniform_param(root, "embed.med", {c.n_med, c.d}, table_bound);
  p.gender_table = uniform_param(root, "embed.gender", {2, c.d}, table_bound);
  p.age_projection = linear_weight(root, "embed.age", 1, c.d);
  p.lab_projection = linear_weight(root, "embed.lab", 2, c.d);
  p.refine_diag = linear_weight(root, "refine.diag", c.d, c.d);
  p.refine_proc = linear_weight(root, "refine.proc", c.d, c.d);
  p.refine_med = linear_weight(root, "refine.med", c.d, c.d);
  p.gru_diag = GruParams::init(c.d, root, "gru.diag");
  p.gru_proc = GruParams::init(c.d, root, "gru.proc");
  p.gru_med = GruParams::init(c.d, root, "gru.med");
  if (c.modality.use_labs) p.gru_lab = GruParams::init(c.d, root, "gru.lab");
  p.intra_diag = DiffAttnParams::init(c.d, c.n_heads, c.attention, c.lambda_graph, root, "intra.diag");
  p.intra_proc = DiffAttnParams::init(c.d, c.n_heads, c.attention, c.lambda_graph, root, "intra.proc");
  p.inter = DiffAttnParams::init(c.d, c.n_heads, c.attention, c.lambda_graph, root, "inter");
  p.query_w = linear_weight(root, "query.w", c.query_width(), c.d);
  p.query_b = zero_bias(c.d);
  p.out_w = linear_weight(root, "head.w", c.repr_width(), c.n_med);
  p.out_b = zero_bias(c.n_med);
}

NamedParams Model::named_params() const {
  const auto& p = params_;
  const auto& m = config_.modality;
  NamedParams out;
  out.emplace_back("embed.diag", p.diag_table);
  out.emplace_back("embed.proc", p.proc_table);
  out.emplace_back("embed.med", p.med_table);
  if (m.use_gender) out.emplace_back("embed.gender", p.gender_table);
  if (m.use_age) out.emplace_back("embed.age", p.age_projection);
  if (m.use_labs) out.emplace_back("embed.lab", p.lab_projection);
  out.emplace_back("refine.diag", p.refine_diag);
  out.emplace_back("refine.proc", p.refine_proc);
  out.emplace_back("refine.med", p.refine_med);
  p.gru_diag.append_to(out, "gru.diag");
  p.gru_proc.append_to(out, "gru.proc");
  p.gru_med.append_to(out, "gru.med");
  if (m.use_labs) p.gru_lab.append_to(out, "gru.lab");
  p.intra_diag.append_to(out, "intra.diag");
  p.intra_proc.append_to(out, "intra.proc");
  p.inter.append_to(out, "inter");
  out.emplace_back("query.w", p.query_w);
  out.emplace_back("query.b", p.query_b);
  out.emplace_back("head.w", p.out_w);
  out.emplace_back("head.b", p.out_b);
  return out;
}

Tensor intra_visit_attention(const Tensor& h_med, const Tensor& h_diag, const Tensor& h_proc,
                             const DiffAttnParams& diag_params, const DiffAttnParams& proc_params,
                             const Tensor& bias) {
  if (bias.defined() && bias.shape() != ad::Shape{1, 1}) {
    throw TensorError("intra_visit_attention: bias must be [1, 1], got " + ad::shape_str(bias.shape()));
  }
  // Single key per call, so any bias is a uniform shift; v1 drops it.
  auto a = diffattn(h_med, h_diag, bias, diag_params);
  auto b = diffattn(h_med, h_proc, bias, proc_params);
  return ad::add(a, b);
}

QueryKv build_query_kv(std::span<const VisitStates> history, const VisitStates& current, const Tensor& h_med,
                       const DemographicVectors& demo, const Tensor& h_lab, const ModalityConfig& modality,
                       const Tensor& query_w, const Tensor& query_b) {
  QueryKv out;
  std::vector<Tensor> q_parts{current.diag, current.proc, h_med};
  if (modality.use_gender) q_parts.push_back(demo.gender);
  if (modality.use_age) q_parts.push_back(demo.age);
  if (modality.use_labs) {
    if (!h_lab.defined()) throw TensorError("build_query_kv: labs enabled but no lab vector given");
    q_parts.push_back(h_lab);
  }
  out.q_input = ad::concat_cols(q_parts);
  if (out.q_input.cols() != query_w.rows()) {
    throw TensorError(fmt::format("build_query_kv: query input width {} does not match projection {}",
                                  out.q_input.cols(), ad::shape_str(query_w.shape())));
  }
  out.q_visit = ad::add(ad::matmul(out.q_input, query_w), query_b);

  const std::size_t d = current.diag.cols();
  if (history.empty()) {
    out.kv = Tensor::zeros({1, d});
    out.layout.push_back({0, Channel::kNull});
    return out;
  }
  std::vector<Tensor> rows;
  for (std::size_t s = 0; s < history.size(); ++s) {
    const auto& h = history[s];
    rows.push_back(h.diag);
    out.layout.push_back({s, Channel::kDiag});
    rows.push_back(h.proc);
    out.layout.push_back({s, Channel::kProc});
    rows.push_back(h.med);
    out.layout.push_back({s, Channel::kMed});
    if (modality.use_labs) {
      if (!h.lab.defined()) throw TensorError(fmt::format("build_query_kv: visit {} has no lab state", s));
      rows.push_back(h.lab);
      out.layout.push_back({s, Channel::kLab});
    }
  }
  out.kv = ad::concat_rows(rows);
  return out;
}

Tensor inter_visit_attention(const Tensor& q_visit, const Tensor& kv, const Tensor& bias,
                             const DiffAttnParams& params, AttentionTrace* trace) {
  if (q_visit.rows() != 1) throw TensorError("inter_visit_attention: expects a single query row");
  return diffattn(q_visit, kv, bias, params, trace);
}

Tensor aggregate_patient(const AggregateInputs& in, const ModalityConfig& modality, double dropout, Rng* rng,
                         bool training) {
  std::vector<Tensor> parts{in.finals.diag, in.finals.proc, in.finals.med};
  if (modality.use_labs) parts.push_back(in.finals.lab);
  if (modality.use_gender) parts.push_back(in.demo.gender);
  if (modality.use_age) parts.push_back(in.demo.age);
  parts.push_back(in.o_intra);
  parts.push_back(in.o_inter);
  parts.push_back(in.last_diag);
  parts.push_back(in.last_proc);
  parts.push_back(in.last_med);
  if (modality.use_labs) parts.push_back(in.last_lab);
  for (const auto& t : parts) {
    if (!t.defined()) throw TensorError("aggregate_patient: missing component for modality " + modality.name());
  }
  auto r = ad::concat_cols(parts);
  if (!training || dropout == 0.0) return r;
  if (rng == nullptr) throw TensorError("aggregate_patient: training dropout needs an RNG");
  return ad::dropout_apply(r, dropout, *rng, true);
}

Tensor predict_logits(const Tensor& r, const Tensor& out_w, const Tensor& out_b) {
  if (r.rank() != 2 || r.cols() != out_w.rows()) {
    throw TensorError(fmt::format("predict_logits: representation {} does not fit head {}", ad::shape_str(r.shape()),
                                  ad::shape_str(out_w.shape())));
  }
  return ad::add(ad::matmul(ad::relu(r), out_w), out_b);
}

Tensor causal_review(const Tensor& z, std::span<const std::size_t> diags, std::span<const std::size_t> procs,
                     const ehr::CausalEffectMatrices& causal, double eta) {
  const std::size_t n = z.cols();
  if (causal.diag_to_med.cols != n || causal.proc_to_med.cols != n) {
    throw TensorError(fmt::format("causal_review: effect matrices have {} / {} medication columns, logits have {}",
                                  causal.diag_to_med.cols, causal.proc_to_med.cols, n));
  }
  if (eta == 0.0) return z;
  std::vector<double> shift(n, 0.0);
  bool any = false;
  for (std::size_t m = 0; m < n; ++m) {
    double cd = 0.0, cp = 0.0;
    for (auto d : diags) cd = std::max(cd, causal.diag_to_med(d, m));
    for (auto p : procs) cp = std::max(cp, causal.proc_to_med(p, m));
    shift[m] = eta * (cd + cp);
    any = any || shift[m] != 0.0;
  }
  if (!any) return z;
  return ad::add_constant(z, shift);
}

namespace {

// Per-visit encoder inputs: pooled-and-refined vectors.
struct VisitInputs {
  Tensor diag, proc, med, lab;
  DemographicVectors demo;
};

VisitInputs encode_visit(const Model& model, const ehr::EncodedVisit& visit, const ehr::EncodedVisit* previous) {
  const auto& p = model.params();
  const auto& k = model.knowledge();
  const auto& m = model.config().modality;
  VisitInputs in;
  in.diag = homograph_refine(embed_codes_pooled(visit.diagnoses, p.diag_table), visit.diagnoses, k.diag_graph,
                             p.diag_table, p.refine_diag);
  in.proc = homograph_refine(embed_codes_pooled(visit.procedures, p.proc_table), visit.procedures, k.proc_graph,
                             p.proc_table, p.refine_proc);
  static const std::vector<std::size_t> kNone;
  const auto& meds = previous ? previous->medications : kNone;
  in.med = homograph_refine(embed_codes_pooled(meds, p.med_table), meds, k.med_graph, p.med_table, p.refine_med);
  if (m.use_labs) in.lab = encode_labs(visit.labs, p.lab_projection);
  if (m.use_gender || m.use_age) {
    in.demo = encode_demographics(visit.gender, visit.age, p.gender_table, p.age_projection);
  }
  return in;
}

GruResult run_gru(const std::vector<VisitInputs>& inputs, Tensor VisitInputs::*field, const GruParams& p) {
  std::vector<Tensor> seq;
  seq.reserve(inputs.size());
  for (const auto& in : inputs) seq.push_back(in.*field);
  return gru_sequence(seq, p);
}

std::vector<VisitForward> forward_visits(const Model& model, std::span<const ehr::EncodedVisit> visits,
                                         const ForwardOptions& options) {
  if (visits.empty()) throw TensorError("forward: patient has no visits");
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& k = model.knowledge();
  const auto& mod = cfg.modality;

  std::vector<VisitInputs> inputs;
  inputs.reserve(visits.size());
  for (std::size_t t = 0; t < visits.size(); ++t) {
    inputs.push_back(encode_visit(model, visits[t], t == 0 ? nullptr : &visits[t - 1]));
  }
  // Step t of each GRU depends on inputs 0..t only.
  auto o_diag = run_gru(inputs, &VisitInputs::diag, p.gru_diag);
  auto o_proc = run_gru(inputs, &VisitInputs::proc, p.gru_proc);
  auto o_med = run_gru(inputs, &VisitInputs::med, p.gru_med);
  GruResult o_lab;
  if (mod.use_labs) o_lab = run_gru(inputs, &VisitInputs::lab, p.gru_lab);

  std::vector<VisitStates> states(visits.size());
  for (std::size_t t = 0; t < visits.size(); ++t) {
    states[t] = {o_diag.outputs[t], o_proc.outputs[t], o_med.outputs[t],
                 mod.use_labs ? o_lab.outputs[t] : Tensor{}};
  }

  std::vector<VisitForward> out(visits.size());
  std::vector<std::vector<std::size_t>> historical_meds;
  static const std::vector<std::size_t> kNone;
  for (std::size_t t = 0; t < visits.size(); ++t) {
    const auto& in = inputs[t];
    auto& res = out[t];
    auto o_intra = intra_visit_attention(in.med, in.diag, in.proc, p.intra_diag, p.intra_proc);
    auto qkv = build_query_kv(std::span(states).first(t), states[t], in.med, in.demo, in.lab, mod, p.query_w,
                              p.query_b);
    Tensor bias;
    if (cfg.graph_bias) {
      const auto& current_meds = t == 0 ? kNone : visits[t - 1].medications;
      res.bias = assemble_inter_bias(current_meds, historical_meds, qkv.layout, k.ddi);
      bias = Tensor::from({1, res.bias.cols}, res.bias.matrix);
    }
    auto o_inter = inter_visit_attention(qkv.q_visit, qkv.kv, bias, p.inter, options.keep_trace ? &res.inter_trace : nullptr);
    if (options.keep_trace) res.layout = qkv.layout;

    AggregateInputs agg{states[t], in.demo, o_intra, o_inter, in.diag, in.proc, in.med, in.lab};
    auto r = aggregate_patient(agg, mod, cfg.dropout, options.dropout_rng, options.training);
    auto z = predict_logits(r, p.out_w, p.out_b);
    res.logits = causal_review(z, visits[t].diagnoses, visits[t].procedures, k.causal, cfg.causal_eta);
    res.probabilities.resize(res.logits.numel());
    for (std::size_t m = 0; m < res.probabilities.size(); ++m) {
      res.probabilities[m] = 1.0 / (1.0 + std::exp(-res.logits.data()[m]));
    }
    historical_meds.push_back(visits[t].medications);
  }
  return out;
}

}  // namespace

std::vector<VisitForward> forward_patient(const Model& model, const ehr::EncodedPatient& patient,
                                          const ForwardOptions& options) {
  try {
    return forward_visits(model, patient.visits, options);
  } catch (const TensorError& e) {
    throw TensorError(fmt::format("patient '{}': {}", patient.patient_id, e.what()));
  }
}

std::vector<double> model_forward(const Model& model, const ehr::EncodedPatient& patient, std::size_t t) {
  if (t < 1 || t > patient.visits.size()) {
    throw std::out_of_range(fmt::format("visit index {} outside 1..{}", t, patient.visits.size()));
  }
  auto visits = std::span(patient.visits).first(t);
  return forward_visits(model, visits, {}).back().probabilities;
}

}  // namespace gdm::model
