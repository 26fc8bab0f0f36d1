#include "gdm/harness/artifacts.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gdm/autodiff/rng.hpp"

namespace gdm::harness {

namespace fs = std::filesystem;
using nlohmann::json;

EvalResult evaluate_predictions(std::span<const objective::PatientPredictions> predictions, const ehr::DdiGraph& ddi,
                                std::uint64_t seed, std::size_t iterations) {
  EvalResult r;
  r.point = objective::compute_metrics(predictions, ddi);
  r.bootstrap = objective::bootstrap_eval(predictions, ddi, seed, iterations);
  return r;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string eval_csv(std::string_view arm, std::uint64_t seed, const EvalResult& r, bool header) {
  std::string out = header ? "arm,seed,metric,mean,std\n" : "";
  for (auto metric : objective::kMetricNames) {
    const auto& s = r.bootstrap.summary(metric);
    out += fmt::format("{},{},{},{:.10f},{:.10f}\n", csv_field(arm), seed, metric, s.mean, s.std);
  }
  return out;
}

std::string train_log_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,train_bce,ddi_ema,beta,val_jaccard,val_ddi_rate\n";
  for (const auto& e : r.epochs) {
    out += fmt::format("{},{:.10f},{:.10f},{:.10f},{:.10f},{:.10f},{:.10f}\n", e.epoch, e.train_loss, e.train_bce,
                       e.ddi_ema, e.beta, e.val_jaccard, e.val_ddi_rate);
  }
  return out;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json params_json(const model::NamedParams& params) {
  json arr = json::array();
  for (const auto& [name, t] : params) {
    arr.push_back({{"name", name},
                   {"shape", t.shape()},
                   {"values", std::vector<double>(t.data().begin(), t.data().end())}});
  }
  return arr;
}

std::string checksum(const json& params) { return fmt::format("{:016x}", fnv1a64(params.dump())); }

}  // namespace

void save_checkpoint(const fs::path& path, const model::Model& model, const RunConfig& config, std::size_t epoch) {
  const auto params = params_json(model.named_params());
  const auto& mc = model.config();
  json j{{"format", "gdm-checkpoint/1"},
         {"config", to_json(config)},
         {"config_hash", config.hash()},
         {"epoch", epoch},
         {"vocab", {{"diag", mc.n_diag}, {"proc", mc.n_proc}, {"med", mc.n_med}}},
         {"checksum", checksum(params)},
         {"params", params}};
  write_text(path, j.dump());
}

Checkpoint load_checkpoint(const fs::path& path) {
  auto fail = [&](const std::string& why) {
    throw CheckpointError(fmt::format("checkpoint '{}': {}", path.string(), why));
  };
  if (!fs::exists(path)) fail("file not found");
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(fmt::format("not valid JSON ({})", e.what()));
  }
  Checkpoint c;
  try {
    if (j.at("format") != "gdm-checkpoint/1") fail("unknown format");
    const auto& params = j.at("params");
    if (checksum(params) != j.at("checksum").get<std::string>()) fail("checksum mismatch");
    c.config = run_config_from_json(j.at("config"));
    c.config_hash = j.at("config_hash").get<std::string>();
    if (c.config_hash != c.config.hash()) fail("config hash does not match the stored config");
    c.epoch = j.at("epoch").get<std::size_t>();
    c.n_diag = j.at("vocab").at("diag").get<std::size_t>();
    c.n_proc = j.at("vocab").at("proc").get<std::size_t>();
    c.n_med = j.at("vocab").at("med").get<std::size_t>();
    for (const auto& p : params) {
      StoredParam sp{p.at("name").get<std::string>(), p.at("shape").get<ad::Shape>(),
                     p.at("values").get<std::vector<double>>()};
      if (ad::shape_numel(sp.shape) != sp.values.size()) fail(fmt::format("parameter '{}' has the wrong size", sp.name));
      c.params.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    fail(fmt::format("malformed ({})", e.what()));
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  return c;
}

model::Model model_from_checkpoint(const Checkpoint& ckpt, const Dataset& data) {
  if (ckpt.n_diag != data.vocab.diag.size() || ckpt.n_proc != data.vocab.proc.size() ||
      ckpt.n_med != data.vocab.med.size()) {
    throw CheckpointError(fmt::format("checkpoint vocabulary {}/{}/{} does not match data {}/{}/{}", ckpt.n_diag,
                                      ckpt.n_proc, ckpt.n_med, data.vocab.diag.size(), data.vocab.proc.size(),
                                      data.vocab.med.size()));
  }
  auto model = make_model(data, ckpt.config);
  auto named = model.named_params();
  if (named.size() != ckpt.params.size()) {
    throw CheckpointError(fmt::format("checkpoint has {} parameters, model expects {}", ckpt.params.size(),
                                      named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& sp = ckpt.params[i];
    auto& [name, t] = named[i];
    if (sp.name != name || sp.shape != t.shape()) {
      throw CheckpointError(fmt::format("parameter {} is '{}' {} in the checkpoint, model expects '{}' {}", i,
                                        sp.name, ad::shape_str(sp.shape), name, ad::shape_str(t.shape())));
    }
    auto dst = t.mutable_data();
    std::copy(sp.values.begin(), sp.values.end(), dst.begin());
  }
  return model;
}

Dataset load_run_data(const RunConfig& config) {
  if (!config.records_path.empty()) return load_external(config.records_path, config.ddi_path, config.seed);
  if (config.data_dir.empty()) throw std::invalid_argument("no data: set a corpus directory or a records file");
  return load_corpus_dir(config.data_dir);
}

RunOutcome run_train_eval(const Dataset& data, const RunConfig& config, const fs::path& out_dir,
                          const EpochCallback& on_epoch) {
  RunOutcome r;
  r.config = config;
  auto model = make_model(data, config);
  r.train = train_model(model, data, config, on_epoch);
  const auto preds = predict_patients(model, data.test, config.threshold);
  r.eval = evaluate_predictions(preds, data.ddi, config.seed, config.bootstrap_iterations);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir / "config.json", to_json(config).dump(2) + "\n");
    save_checkpoint(out_dir / "checkpoint.json", model, config, r.train.best_epoch);
    write_text(out_dir / "train_log.csv", train_log_csv(r.train));
    write_text(out_dir / "metrics.csv", eval_csv("run", config.seed, r.eval));
    json run{{"config_hash", config.hash()},
             {"best_epoch", r.train.best_epoch},
             {"best_val_jaccard", r.train.best_val_jaccard},
             {"initial_train_bce", r.train.initial_train_bce},
             {"final_train_bce", r.train.final_train_bce}};
    write_text(out_dir / "run.json", run.dump(2) + "\n");
  }
  return r;
}

}  // namespace gdm::harness
