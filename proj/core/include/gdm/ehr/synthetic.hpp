#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gdm/ehr/records.hpp"

namespace gdm::ehr {

struct SyntheticConfig {
  std::size_t n_patients = 200;
  std::size_t n_diag = 40;
  std::size_t n_proc = 20;
  std::size_t n_med = 25;
  std::size_t n_lab_tests = 8;
  double mean_visits = 2.4;
  std::size_t min_diag_per_visit = 1;
  std::size_t max_diag_per_visit = 5;
  std::size_t max_meds_per_diag = 2;
  /// Probability that each medication indicator is flipped after the union.
  double noise_rate = 0.05;
  /// Fraction of visits that receive one spurious extra medication.
  double confounder_rate = 0.3;
  std::size_t n_ddi_pairs = 12;
  SplitFractions split{};
};

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);
nlohmann::json synthetic_config_to_json(const SyntheticConfig& c);
/// Throws DataError on inconsistent settings.
void validate(const SyntheticConfig& c);

struct SyntheticStats {
  std::size_t n_patients = 0;
  std::size_t n_visits = 0;
  double avg_visits = 0.0;
  double avg_meds_per_visit = 0.0;
  std::size_t n_diag = 0;
  std::size_t n_proc = 0;
  std::size_t n_med = 0;
  std::size_t n_ddi_pairs = 0;
  /// Micro DDI rate of the ground-truth prescriptions.
  double ground_truth_ddi_rate = 0.0;
};

struct SyntheticCorpus {
  std::vector<PatientRecord> records;
  Vocabularies vocab;
  DdiGraph ddi;
  CausalEffectMatrices causal;
  DatasetSplit split;
  /// Planted truth: medications implied by each diagnosis (vocabulary indices).
  std::vector<std::vector<std::size_t>> meds_of_diag;
  /// The co-implied interacting pair, when n_ddi_pairs > 0.
  std::pair<std::size_t, std::size_t> planted_pair{0, 0};
  SyntheticStats stats;
};

/// Deterministic in (config, seed). Each diagnosis implies a fixed medication
/// subset; visit medications are the union over its diagnoses, then noise and
/// confounders are applied. Causal matrices are empirical P(m | code) over the
/// training part of the split.
SyntheticCorpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Empirical P(med | code) over the given encoded visits.
CausalEffectMatrices empirical_causal_effects(const std::vector<EncodedPatient>& patients, std::size_t n_diag,
                                              std::size_t n_proc, std::size_t n_med);

/// Writes records.jsonl, ddi.tsv, causal_diag.tsv, causal_proc.tsv, split.json
/// and manifest.json into `dir`.
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus, const SyntheticConfig& config,
                  std::uint64_t seed);

}  // namespace gdm::ehr
