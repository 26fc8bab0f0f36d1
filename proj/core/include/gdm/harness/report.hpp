#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdm/harness/artifacts.hpp"

namespace gdm::harness {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportOptions {
  /// Test patients per checkpoint in the attention dump.
  std::size_t max_patients = 5;
};

struct ReportSummary {
  std::vector<std::filesystem::path> written;
};

/// One epoch curve per train_log.csv, rendered as SVG.
std::string plot_train_log_svg(const std::string& title, const std::string& csv);

/// JSON lines "patient, visit, head, kv_position, kv_visit, modality, weight"
/// for every inter-visit attention weight, and one line per gate value.
struct AttentionDump {
  std::string weights;
  std::string gates;
};
AttentionDump dump_attention(const model::Model& model, std::span<const ehr::EncodedPatient> patients);

/// Scans `artifacts` for train logs, checkpoints and ablation tables and
/// writes plots, dumps and table copies under `out`. Throws ReportError
/// listing what is missing when nothing usable is found or a run directory
/// is incomplete.
ReportSummary build_report(const std::filesystem::path& artifacts, const std::filesystem::path& out,
                           const ReportOptions& options = {});

}  // namespace gdm::harness
