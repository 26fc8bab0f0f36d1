#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gdm/ehr/records.hpp"

namespace gdm::ehr {

struct LoadedRecords {
  std::vector<PatientRecord> records;
  std::size_t single_visit_excluded = 0;
};

/// One JSON object per line:
///   {"patient_id": str, "visits": [{"diag": [str], "proc": [str], "med": [str],
///     "labs": [[int, float]], "gender": 0|1, "age": float}]}
/// Code lists are deduplicated and sorted. Blank lines are skipped. Errors
/// carry the 1-based line number and the offending field. When `vocab` is
/// given, every code must already be in it.
LoadedRecords load_records(const std::filesystem::path& path, const Vocabularies* vocab = nullptr);
LoadedRecords parse_records(std::istream& in, const Vocabularies* vocab = nullptr);

void write_records(const std::filesystem::path& path, const std::vector<PatientRecord>& records);
std::string record_to_line(const PatientRecord& record);

struct LoadedDdi {
  DdiGraph graph;
  std::size_t self_edges_ignored = 0;
};

/// Whitespace-separated medication code pairs, one per line.
LoadedDdi load_ddi_edges(const std::filesystem::path& path, const CodeVocab& med_vocab);
void write_ddi_edges(const std::filesystem::path& path, const DdiGraph& graph, const CodeVocab& med_vocab);

/// "row_code med_code value" triplets; unspecified entries are 0. Negative or
/// conflicting duplicate values are rejected.
EffectMatrix load_causal_matrix(const std::filesystem::path& path, const CodeVocab& row_vocab,
                                const CodeVocab& med_vocab);
void write_causal_matrix(const std::filesystem::path& path, const EffectMatrix& m, const CodeVocab& row_vocab,
                         const CodeVocab& med_vocab);

void write_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit load_split(const std::filesystem::path& path);

}  // namespace gdm::ehr
