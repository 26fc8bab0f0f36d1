#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gdm/ehr/records.hpp"
#include "gdm/ehr/synthetic.hpp"

namespace gdm::harness {

/// Encoded corpus ready for training, with its fixed knowledge graphs.
struct Dataset {
  ehr::Vocabularies vocab;
  ehr::DdiGraph ddi;
  ehr::CausalEffectMatrices causal;
  ehr::DatasetSplit split;
  std::vector<ehr::PatientRecord> records;
  std::vector<ehr::EncodedPatient> train;
  std::vector<ehr::EncodedPatient> validation;
  std::vector<ehr::EncodedPatient> test;
};

/// Code vocabularies cover all records; lab ranges are fit on the training
/// part only.
Dataset make_dataset(std::vector<ehr::PatientRecord> records, ehr::DdiGraph ddi, ehr::CausalEffectMatrices causal,
                     ehr::DatasetSplit split);

Dataset dataset_from_corpus(const ehr::SyntheticCorpus& corpus);

/// Reads a directory written by write_corpus.
Dataset load_corpus_dir(const std::filesystem::path& dir);

/// Records in the loader's JSONL form plus an optional DDI edge list. The
/// split is drawn from `seed` and causal effects are estimated on train.
Dataset load_external(const std::filesystem::path& records, const std::filesystem::path& ddi, std::uint64_t seed);

}  // namespace gdm::harness
