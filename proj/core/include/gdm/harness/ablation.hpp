#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gdm/harness/artifacts.hpp"

namespace gdm::harness {

struct Arm {
  std::string name;
  model::AttnVariant attn = model::AttnVariant::kDualV2;
  bool graph_bias = false;
  model::ModalityConfig modality;
  std::optional<double> lambda_graph;

  /// Filesystem-safe form of the name.
  std::string slug() const;
  RunConfig apply(RunConfig base) const;
};

/// Baseline (v1), Dual v2 and GraphDiffMed over the -, L, GY, LGY settings.
std::vector<Arm> standard_arms();
/// GraphDiffMed (-) with lambda_graph forced to 0.
Arm kill_switch_arm();
inline constexpr const char* kBaselineArm = "Baseline (v1)";
inline constexpr const char* kKillSwitchReference = "Dual v2 (-)";

struct GridConfig {
  RunConfig base;
  std::vector<Arm> arms = standard_arms();
  std::vector<std::uint64_t> seeds{kDefaultSeeds.begin(), kDefaultSeeds.end()};
  bool kill_switch_pair = true;
};

/// {"run": {...}, "seeds": [...], "arms": [names], "kill_switch_pair": bool}.
GridConfig grid_config_from_json(const nlohmann::json& j);

struct CellResult {
  std::string arm;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string config_hash;
  std::size_t best_epoch = 0;
  EvalResult eval;
};

/// Across-seed mean and population std of the per-seed bootstrap means.
struct ArmSummary {
  std::string arm;
  std::size_t seeds_ok = 0;
  objective::MetricValues mean;
  objective::MetricValues std;
};

struct SignificanceRow {
  std::string arm;
  std::string reference;
  std::string metric;
  objective::WelchResult test;
};

struct KillSwitchCheck {
  std::string arm;
  std::string reference;
  /// Every per-seed metric value agrees bit for bit.
  bool identical = false;
};

struct AblationResult {
  std::vector<CellResult> cells;
  std::vector<ArmSummary> arms;
  std::vector<SignificanceRow> significance;
  std::optional<KillSwitchCheck> kill_switch;
};

using ProgressCallback = std::function<void(const CellResult&)>;

/// Runs every (arm, seed) cell; a failing cell is recorded and skipped. When
/// `out_dir` is non-empty each cell writes its run artifacts under
/// runs/<arm>/seed-<seed> and the tables land in `out_dir`.
AblationResult run_ablation(const Dataset& data, const GridConfig& grid, const std::filesystem::path& out_dir,
                            const ProgressCallback& progress = {});

/// arm,seeds_ok,<metric>_mean,<metric>_std,...
std::string ablation_table_csv(const AblationResult& r);
/// Fixed-width "mean +- std" rendering of the same table.
std::string ablation_table_text(const AblationResult& r);
std::string ablation_seeds_csv(const AblationResult& r);
std::string significance_csv(const AblationResult& r);
void write_ablation(const std::filesystem::path& out_dir, const AblationResult& r);

/// Exact equality of two evaluation results.
bool same_metrics(const EvalResult& a, const EvalResult& b);

}  // namespace gdm::harness
