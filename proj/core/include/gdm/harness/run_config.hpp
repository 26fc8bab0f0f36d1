#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "gdm/ehr/records.hpp"
#include "gdm/model/temporal_model.hpp"
#include "gdm/objective/losses.hpp"

namespace gdm::harness {

inline constexpr std::array<std::uint64_t, 5> kDefaultSeeds{1, 3, 16, 18, 1234};

/// How the L2 term enters the per-patient steps. kDataset treats
/// alpha * ||theta||^2 as one term of the objective summed over the training
/// set, so each of the N patient steps carries alpha / N of it. kPatient adds
/// the full term at every step.
enum class RegScope { kDataset, kPatient };

std::string_view reg_scope_name(RegScope s);
RegScope parse_reg_scope(std::string_view s);

/// Everything that determines one training run.
struct RunConfig {
  std::uint64_t seed = 1;
  model::AttnVariant attn = model::AttnVariant::kDualV2;
  bool graph_bias = true;
  model::ModalityConfig modality;
  std::size_t epochs = 20;
  double learning_rate = 5e-4;
  std::size_t d = 64;
  std::size_t n_heads = 8;
  double dropout = 0.7;
  double lambda_graph = 0.1;
  double causal_eta = 1.0;
  double threshold = 0.5;
  std::size_t bootstrap_iterations = 10;
  objective::LossConfig loss;
  RegScope reg_scope = RegScope::kDataset;
  /// Corpus directory as written by `generate`.
  std::string data_dir;
  /// Optional overrides for user-supplied data.
  std::string records_path;
  std::string ddi_path;
  std::string out_dir;

  /// Throws std::invalid_argument; graph_bias requires the dual v2 kernel.
  void validate() const;
  model::ModelConfig model_config(const ehr::Vocabularies& vocab) const;
  /// 16 hex digits over every field except out_dir.
  std::string hash() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace gdm::harness
