#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gdm/ehr/synthetic.hpp"
#include "gdm/harness/ablation.hpp"
#include "gdm/harness/artifacts.hpp"
#include "gdm/harness/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gdm;
using namespace gdm::harness;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot open config '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("config '{}': {}", path, e.what()));
  }
}

/// Flags shared by the commands that build a RunConfig.
struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> modality, attn, graph_bias, data, records, ddi, out;
  std::optional<std::size_t> epochs;

  // Model flags make sense for train only: eval reads the architecture from
  // the checkpoint and ablate takes it from each arm.
  enum class Scope { kTrain, kAblate, kEval };

  void add_to(CLI::App* cmd, Scope scope) {
    if (scope == Scope::kTrain) {
      cmd->add_option("--config", config, "JSON run config");
      cmd->add_option("--modality", modality, "Extra modalities")
          ->check(CLI::IsMember({"base", "-", "G", "GY", "L", "LGY"}));
      cmd->add_option("--attn", attn, "Attention kernel")->check(CLI::IsMember({"v1", "dual_v2"}));
      cmd->add_option("--graph-bias", graph_bias, "DDI graph bias")->check(CLI::IsMember({"on", "off"}));
    }
    cmd->add_option("--seed", seed, scope == Scope::kAblate ? "Run only this seed" : "Run seed");
    if (scope != Scope::kEval) cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--data", data, "Corpus directory written by generate");
    cmd->add_option("--records", records, "JSONL patient records (instead of --data)");
    cmd->add_option("--ddi", ddi, "DDI edge list for --records");
    cmd->add_option("--out", out, "Output directory");
  }

  RunConfig apply(RunConfig c) const {
    if (seed) c.seed = *seed;
    if (modality) c.modality = model::ModalityConfig::parse(*modality);
    if (attn) {
      c.attn = model::parse_variant(*attn);
      // The v1 kernel has no bias path; an explicit --graph-bias still wins.
      if (c.attn == model::AttnVariant::kV1 && !graph_bias) c.graph_bias = false;
    }
    if (graph_bias) c.graph_bias = *graph_bias == "on";
    if (epochs) c.epochs = *epochs;
    if (data) c.data_dir = fs::absolute(*data).string();
    if (records) c.records_path = fs::absolute(*records).string();
    if (ddi) c.ddi_path = fs::absolute(*ddi).string();
    if (out) c.out_dir = *out;
    c.validate();
    return c;
  }

  RunConfig build() const { return apply(config.empty() ? RunConfig{} : run_config_from_json(read_json(config))); }
};

int cmd_generate(const std::string& config, std::optional<std::uint64_t> seed_flag, const std::string& out) {
  ehr::SyntheticConfig c;
  std::uint64_t seed = 1;
  if (!config.empty()) {
    const auto j = read_json(config);
    c = ehr::synthetic_config_from_json(j);
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  }
  if (seed_flag) seed = *seed_flag;
  auto corpus = ehr::generate_synthetic(c, seed);
  ehr::write_corpus(out, corpus, c, seed);
  const auto& st = corpus.stats;
  fmt::print("wrote {}: {} patients, {} visits, vocab {}/{}/{}, {} DDI pairs, ground-truth DDI rate {:.4f}\n", out,
             st.n_patients, st.n_visits, st.n_diag, st.n_proc, st.n_med, st.n_ddi_pairs, st.ground_truth_ddi_rate);
  return 0;
}

int cmd_train(const RunFlags& flags) {
  const auto cfg = flags.build();
  if (cfg.out_dir.empty()) throw std::invalid_argument("train needs --out");
  const auto data = load_run_data(cfg);
  fmt::print("config {} | train {} / val {} / test {} patients\n", cfg.hash(), data.train.size(),
             data.validation.size(), data.test.size());
  const auto r = run_train_eval(data, cfg, cfg.out_dir, [](const EpochLog& e) {
    fmt::print("epoch {:>3}  loss {:.4f}  bce {:.4f}  val jaccard {:.4f}  val ddi {:.4f}\n", e.epoch, e.train_loss,
               e.train_bce, e.val_jaccard, e.val_ddi_rate);
    std::fflush(stdout);
  });
  fmt::print("best epoch {} (val jaccard {:.4f}); test jaccard {:.4f} +- {:.4f}\n", r.train.best_epoch,
             r.train.best_val_jaccard, r.eval.bootstrap.jaccard.mean, r.eval.bootstrap.jaccard.std);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const RunFlags& flags) {
  const auto ckpt = load_checkpoint(checkpoint);
  RunConfig cfg = ckpt.config;
  if (flags.data) {
    cfg.data_dir = fs::absolute(*flags.data).string();
    cfg.records_path.clear();
  }
  if (flags.records) cfg.records_path = fs::absolute(*flags.records).string();
  if (flags.ddi) cfg.ddi_path = fs::absolute(*flags.ddi).string();
  const std::uint64_t seed = flags.seed.value_or(cfg.seed);
  const auto data = load_run_data(cfg);
  const auto model = model_from_checkpoint(ckpt, data);
  const auto preds = predict_patients(model, data.test, cfg.threshold);
  const auto r = evaluate_predictions(preds, data.ddi, seed, cfg.bootstrap_iterations);
  const auto csv = eval_csv(std::string("checkpoint-") + ckpt.config_hash, seed, r);
  if (flags.out) {
    write_text(fs::path(*flags.out) / "metrics.csv", csv);
    fmt::print("wrote {}\n", (fs::path(*flags.out) / "metrics.csv").string());
  } else {
    fmt::print("{}", csv);
  }
  return 0;
}

int cmd_ablate(const std::string& config, const RunFlags& flags) {
  GridConfig grid = config.empty() ? GridConfig{} : grid_config_from_json(read_json(config));
  grid.base = flags.apply(grid.base);
  if (flags.seed) grid.seeds = {*flags.seed};
  if (grid.base.out_dir.empty()) throw std::invalid_argument("ablate needs --out");
  const auto data = load_run_data(grid.base);
  const auto r = run_ablation(data, grid, grid.base.out_dir, [](const CellResult& c) {
    if (c.ok) {
      fmt::print("{:<28} seed {:>5}  jaccard {:.4f}  ddi {:.4f}\n", c.arm, c.seed, c.eval.bootstrap.jaccard.mean,
                 c.eval.bootstrap.ddi_rate.mean);
    } else {
      fmt::print(stderr, "{:<28} seed {:>5}  FAILED: {}\n", c.arm, c.seed, c.error);
    }
    std::fflush(stdout);
  });
  fmt::print("\n{}", ablation_table_text(r));
  if (r.kill_switch) {
    fmt::print("kill switch {} vs {}: {}\n", r.kill_switch->arm, r.kill_switch->reference,
               r.kill_switch->identical ? "identical" : "DIFFERENT");
  }
  return 0;
}

int cmd_report(const std::string& artifacts, const std::string& out, std::size_t patients) {
  ReportOptions opts;
  opts.max_patients = patients;
  const auto s = build_report(artifacts, out, opts);
  for (const auto& p : s.written) fmt::print("{}\n", p.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Medication recommendation with graph-biased differential attention"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus");
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config", gen_config, "JSON generator config");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train one model and evaluate it on the test split");
  RunFlags train_flags;
  train_flags.add_to(train, RunFlags::Scope::kTrain);

  auto* eval = app.add_subcommand("eval", "Bootstrap evaluation of a checkpoint");
  RunFlags eval_flags;
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
  eval_flags.add_to(eval, RunFlags::Scope::kEval);

  auto* ablate = app.add_subcommand("ablate", "Run the ablation grid");
  RunFlags ablate_flags;
  std::string grid_config;
  ablate->add_option("--config", grid_config, "JSON grid config");
  ablate_flags.add_to(ablate, RunFlags::Scope::kAblate);

  auto* report = app.add_subcommand("report", "Plots, attention dumps and tables from artifacts");
  std::string artifacts, report_out;
  std::size_t patients = 5;
  report->add_option("--artifacts", artifacts, "Directory of run or grid artifacts")->required();
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_option("--patients", patients, "Test patients per checkpoint in the attention dump");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(gen_config, gen_seed, gen_out);
    if (*train) return cmd_train(train_flags);
    if (*eval) return cmd_eval(checkpoint, eval_flags);
    if (*ablate) return cmd_ablate(grid_config, ablate_flags);
    if (*report) return cmd_report(artifacts, report_out, patients);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
