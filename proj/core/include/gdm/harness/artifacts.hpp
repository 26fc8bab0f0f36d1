#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gdm/harness/dataset.hpp"
#include "gdm/harness/run_config.hpp"
#include "gdm/harness/trainer.hpp"
#include "gdm/objective/metrics.hpp"

namespace gdm::harness {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalResult {
  objective::MetricValues point;
  objective::BootstrapReport bootstrap;
};

EvalResult evaluate_predictions(std::span<const objective::PatientPredictions> predictions, const ehr::DdiGraph& ddi,
                                std::uint64_t seed, std::size_t iterations);

/// Rows "arm,seed,metric,mean,std", one per metric.
/// Quotes a text field when it holds a comma, quote or newline.
std::string csv_field(std::string_view s);
std::string eval_csv(std::string_view arm, std::uint64_t seed, const EvalResult& r, bool header = true);
std::string train_log_csv(const TrainResult& r);

struct StoredParam {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  RunConfig config;
  std::string config_hash;
  std::size_t epoch = 0;
  std::size_t n_diag = 0;
  std::size_t n_proc = 0;
  std::size_t n_med = 0;
  std::vector<StoredParam> params;
};

/// JSON with an FNV-1a checksum over the parameter block.
void save_checkpoint(const std::filesystem::path& path, const model::Model& model, const RunConfig& config,
                     std::size_t epoch);
/// Throws CheckpointError on unreadable, truncated or tampered files.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Builds the model described by the checkpoint over `data` and loads its
/// parameters; names, shapes and vocabulary sizes must all agree.
model::Model model_from_checkpoint(const Checkpoint& ckpt, const Dataset& data);

/// Resolves the data a RunConfig points at.
Dataset load_run_data(const RunConfig& config);

struct RunOutcome {
  RunConfig config;
  TrainResult train;
  EvalResult eval;
};

/// Train, evaluate on the test split and, when `out_dir` is non-empty, write
/// config.json, checkpoint.json, train_log.csv, metrics.csv and run.json.
RunOutcome run_train_eval(const Dataset& data, const RunConfig& config, const std::filesystem::path& out_dir,
                          const EpochCallback& on_epoch = {});

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace gdm::harness
