#include "gdm/harness/dataset.hpp"

#include <fmt/format.h>

#include "gdm/ehr/io.hpp"

namespace gdm::harness {

namespace fs = std::filesystem;

Dataset make_dataset(std::vector<ehr::PatientRecord> records, ehr::DdiGraph ddi, ehr::CausalEffectMatrices causal,
                     ehr::DatasetSplit split) {
  Dataset ds;
  ds.vocab = ehr::build_vocabularies(records);
  const auto train_records = ehr::select_patients(records, split.train);
  ds.vocab.labs = ehr::LabVocab(train_records);
  if (ddi.size() != ds.vocab.med.size()) {
    throw ehr::DataError(fmt::format("DDI graph covers {} medications, vocabulary has {}", ddi.size(),
                                     ds.vocab.med.size()));
  }
  ds.train = ehr::encode_patients(train_records, ds.vocab);
  ds.validation = ehr::encode_patients(ehr::select_patients(records, split.validation), ds.vocab);
  ds.test = ehr::encode_patients(ehr::select_patients(records, split.test), ds.vocab);
  ds.ddi = std::move(ddi);
  ds.causal = std::move(causal);
  ds.split = std::move(split);
  ds.records = std::move(records);
  return ds;
}

Dataset dataset_from_corpus(const ehr::SyntheticCorpus& corpus) {
  return make_dataset(corpus.records, corpus.ddi, corpus.causal, corpus.split);
}

Dataset load_corpus_dir(const fs::path& dir) {
  for (const char* f : {"records.jsonl", "ddi.tsv", "causal_diag.tsv", "causal_proc.tsv", "split.json"}) {
    if (!fs::exists(dir / f)) throw ehr::DataError(fmt::format("corpus '{}' is missing {}", dir.string(), f));
  }
  auto records = ehr::load_records(dir / "records.jsonl").records;
  const auto vocab = ehr::build_vocabularies(records);
  auto ddi = ehr::load_ddi_edges(dir / "ddi.tsv", vocab.med).graph;
  ehr::CausalEffectMatrices causal{ehr::load_causal_matrix(dir / "causal_diag.tsv", vocab.diag, vocab.med),
                                   ehr::load_causal_matrix(dir / "causal_proc.tsv", vocab.proc, vocab.med)};
  auto split = ehr::load_split(dir / "split.json");
  return make_dataset(std::move(records), std::move(ddi), std::move(causal), std::move(split));
}

Dataset load_external(const fs::path& records_path, const fs::path& ddi_path, std::uint64_t seed) {
  auto records = ehr::load_records(records_path).records;
  const auto vocab = ehr::build_vocabularies(records);
  ehr::DdiGraph ddi = ddi_path.empty() ? ehr::DdiGraph(vocab.med.size()) : ehr::load_ddi_edges(ddi_path, vocab.med).graph;
  auto split = ehr::split_patients(records, ehr::SplitFractions{}, seed);
  auto train = ehr::encode_patients(ehr::select_patients(records, split.train), vocab);
  auto causal = ehr::empirical_causal_effects(train, vocab.diag.size(), vocab.proc.size(), vocab.med.size());
  return make_dataset(std::move(records), std::move(ddi), std::move(causal), std::move(split));
}

}  // namespace gdm::harness
