#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdm::ehr {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabEvent {
  int test_id = 0;
  double value = 0.0;
  bool operator==(const LabEvent&) const = default;
};

struct Visit {
  std::vector<std::string> diagnoses;
  std::vector<std::string> procedures;
  std::vector<std::string> medications;
  std::vector<LabEvent> labs;
  int gender = 0;
  double age = 0.0;
  bool operator==(const Visit&) const = default;
};

/// One patient's chronological visits. Loaded records always have >= 2.
struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;
  bool operator==(const PatientRecord&) const = default;
};

/// Bijective code <-> dense index map.
class CodeVocab {
 public:
  CodeVocab() = default;
  /// Codes are deduplicated and indexed in lexicographic order.
  explicit CodeVocab(std::vector<std::string> codes);

  std::size_t size() const { return codes_.size(); }
  bool contains(const std::string& code) const { return index_.count(code) != 0; }
  /// Throws DataError naming the code when absent.
  std::size_t index(const std::string& code) const;
  const std::string& code(std::size_t i) const { return codes_.at(i); }
  const std::vector<std::string>& codes() const { return codes_; }

 private:
  std::vector<std::string> codes_;
  std::map<std::string, std::size_t> index_;
};

/// Lab test ids with per-test value ranges, fit on training records.
class LabVocab {
 public:
  struct Range {
    double min = 0.0;
    double max = 0.0;
  };

  LabVocab() = default;
  explicit LabVocab(const std::vector<PatientRecord>& records);

  std::size_t size() const { return ids_.size(); }
  bool contains(int test_id) const { return index_.count(test_id) != 0; }
  const std::vector<int>& ids() const { return ids_; }
  const Range& range(std::size_t i) const { return ranges_.at(i); }

  /// (index / n_tests, min-max value). Unknown ids map to the reserved slot
  /// (n_tests / n_tests, 0.5); a constant-valued test normalizes to 0.5.
  std::pair<double, double> normalize(const LabEvent& e) const;

 private:
  std::vector<int> ids_;
  std::map<int, std::size_t> index_;
  std::vector<Range> ranges_;
};

struct Vocabularies {
  CodeVocab diag;
  CodeVocab proc;
  CodeVocab med;
  LabVocab labs;
};

/// Indexes every code seen in `records`; lab ranges come from the same set.
/// Empty input is rejected.
Vocabularies build_vocabularies(const std::vector<PatientRecord>& records);

/// Binary symmetric drug-drug interaction adjacency with zero diagonal.
class DdiGraph {
 public:
  DdiGraph() = default;
  explicit DdiGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool edge(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }
  double operator()(std::size_t i, std::size_t j) const { return adj_[i * n_ + j]; }
  /// Sets both directions; self-pairs are rejected.
  void add_edge(std::size_t i, std::size_t j);
  std::size_t edge_count() const;
  /// Unordered pairs (i < j) with an interaction.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  bool is_valid() const;

  bool operator==(const DdiGraph&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adj_;
};

/// Dense row-major matrix of non-negative effect strengths.
struct EffectMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  EffectMatrix() = default;
  EffectMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  bool operator==(const EffectMatrix&) const = default;
};

struct CausalEffectMatrices {
  EffectMatrix diag_to_med;
  EffectMatrix proc_to_med;
};

/// Normalized lab event as consumed by the lab encoder.
struct NormalizedLab {
  double id = 0.0;
  double value = 0.0;
};

/// A visit with codes replaced by dense vocabulary indices (sorted, unique).
struct EncodedVisit {
  std::vector<std::size_t> diagnoses;
  std::vector<std::size_t> procedures;
  std::vector<std::size_t> medications;
  std::vector<NormalizedLab> labs;
  int gender = 0;
  double age = 0.0;
};

struct EncodedPatient {
  std::string patient_id;
  std::vector<EncodedVisit> visits;
};

EncodedPatient encode_patient(const PatientRecord& record, const Vocabularies& vocab);
std::vector<EncodedPatient> encode_patients(const std::vector<PatientRecord>& records, const Vocabularies& vocab);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Patient-level shuffled split. Sizes: validation and test are rounded,
/// train takes the remainder; every part must be non-empty.
DatasetSplit split_patients(const std::vector<PatientRecord>& records, SplitFractions fractions, std::uint64_t seed);

/// Records of `records` whose id is in `ids`, preserving record order.
std::vector<PatientRecord> select_patients(const std::vector<PatientRecord>& records,
                                           const std::vector<std::string>& ids);

}  // namespace gdm::ehr
