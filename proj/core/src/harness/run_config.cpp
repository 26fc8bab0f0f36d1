#include "gdm/harness/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gdm/autodiff/rng.hpp"

namespace gdm::harness {

using nlohmann::json;

std::string_view reg_scope_name(RegScope s) { return s == RegScope::kDataset ? "dataset" : "patient"; }

RegScope parse_reg_scope(std::string_view s) {
  if (s == "dataset") return RegScope::kDataset;
  if (s == "patient") return RegScope::kPatient;
  throw std::invalid_argument(fmt::format("reg_scope must be 'dataset' or 'patient', got '{}'", s));
}

void RunConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("run config: " + m); };
  if (graph_bias && attn != model::AttnVariant::kDualV2) bad("graph_bias requires attn = dual_v2");
  if (d == 0 || n_heads == 0 || d % n_heads != 0) bad(fmt::format("d = {} must be a positive multiple of heads = {}", d, n_heads));
  if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
  if (!(lambda_graph >= 0.0)) bad("lambda_graph must be >= 0");
  if (!(causal_eta >= 0.0)) bad("causal_eta must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) bad("threshold must be in (0, 1)");
  if (bootstrap_iterations == 0) bad("bootstrap_iterations must be positive");
  loss.validate();
}

model::ModelConfig RunConfig::model_config(const ehr::Vocabularies& vocab) const {
  model::ModelConfig m;
  m.d = d;
  m.n_heads = n_heads;
  m.attention = attn;
  m.graph_bias = graph_bias;
  m.lambda_graph = lambda_graph;
  m.modality = modality;
  m.dropout = dropout;
  m.causal_eta = causal_eta;
  m.n_diag = vocab.diag.size();
  m.n_proc = vocab.proc.size();
  m.n_med = vocab.med.size();
  return m;
}

json to_json(const RunConfig& c) {
  return json{{"seed", c.seed},
              {"attn", std::string(model::variant_name(c.attn))},
              {"graph_bias", c.graph_bias},
              {"modality", c.modality.name()},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"d", c.d},
              {"heads", c.n_heads},
              {"dropout", c.dropout},
              {"lambda_graph", c.lambda_graph},
              {"causal_eta", c.causal_eta},
              {"threshold", c.threshold},
              {"bootstrap_iterations", c.bootstrap_iterations},
              {"loss",
               {{"beta0", c.loss.beta0},
                {"gamma", c.loss.gamma},
                {"ddi_target", c.loss.ddi_target},
                {"alpha", c.loss.alpha},
                {"ddi_coeff", c.loss.ddi_coeff},
                {"clamp_beta_nonnegative", c.loss.clamp_beta_nonnegative}}},
              {"reg_scope", std::string(reg_scope_name(c.reg_scope))},
              {"data", c.data_dir},
              {"records", c.records_path},
              {"ddi", c.ddi_path},
              {"out", c.out_dir}};
}

std::string RunConfig::hash() const {
  auto j = to_json(*this);
  j.erase("out");
  return fmt::format("{:016x}", fnv1a64(j.dump()));
}

namespace {

template <class T>
void read(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw std::invalid_argument(fmt::format("{}: unknown key '{}'", where, it.key()));
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("run config must be an object");
  reject_unknown(j,
                 {"seed", "attn", "graph_bias", "modality", "epochs", "learning_rate", "d", "heads", "dropout",
                  "lambda_graph", "causal_eta", "threshold", "bootstrap_iterations", "loss", "reg_scope", "data", "records", "ddi",
                  "out"},
                 "run config");
  RunConfig c;
  try {
    read(j, "seed", c.seed);
    if (auto it = j.find("attn"); it != j.end()) c.attn = model::parse_variant(it->get<std::string>());
    read(j, "graph_bias", c.graph_bias);
    if (auto it = j.find("modality"); it != j.end()) c.modality = model::ModalityConfig::parse(it->get<std::string>());
    read(j, "epochs", c.epochs);
    read(j, "learning_rate", c.learning_rate);
    read(j, "d", c.d);
    read(j, "heads", c.n_heads);
    read(j, "dropout", c.dropout);
    read(j, "lambda_graph", c.lambda_graph);
    read(j, "causal_eta", c.causal_eta);
    read(j, "threshold", c.threshold);
    read(j, "bootstrap_iterations", c.bootstrap_iterations);
    if (auto it = j.find("loss"); it != j.end()) {
      reject_unknown(*it, {"beta0", "gamma", "ddi_target", "alpha", "ddi_coeff", "clamp_beta_nonnegative"},
                     "loss config");
      read(*it, "beta0", c.loss.beta0);
      read(*it, "gamma", c.loss.gamma);
      read(*it, "ddi_target", c.loss.ddi_target);
      read(*it, "alpha", c.loss.alpha);
      read(*it, "ddi_coeff", c.loss.ddi_coeff);
      read(*it, "clamp_beta_nonnegative", c.loss.clamp_beta_nonnegative);
    }
    if (auto it = j.find("reg_scope"); it != j.end()) c.reg_scope = parse_reg_scope(it->get<std::string>());
    read(j, "data", c.data_dir);
    read(j, "records", c.records_path);
    read(j, "ddi", c.ddi_path);
    read(j, "out", c.out_dir);
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("run config: {}", e.what()));
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot open config '{}'", path));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("config '{}': {}", path, e.what()));
  }
  return run_config_from_json(j);
}

}  // namespace gdm::harness
