#include "gdm/ehr/records.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "gdm/autodiff/rng.hpp"

namespace gdm::ehr {

CodeVocab::CodeVocab(std::vector<std::string> codes) : codes_(std::move(codes)) {
  std::sort(codes_.begin(), codes_.end());
  codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
  for (std::size_t i = 0; i < codes_.size(); ++i) index_.emplace(codes_[i], i);
}

std::size_t CodeVocab::index(const std::string& code) const {
  auto it = index_.find(code);
  if (it == index_.end()) throw DataError(fmt::format("unknown code '{}'", code));
  return it->second;
}

LabVocab::LabVocab(const std::vector<PatientRecord>& records) {
  std::map<int, Range> seen;
  for (const auto& r : records) {
    for (const auto& v : r.visits) {
      for (const auto& e : v.labs) {
        auto [it, fresh] = seen.try_emplace(e.test_id, Range{e.value, e.value});
        if (!fresh) {
          it->second.min = std::min(it->second.min, e.value);
          it->second.max = std::max(it->second.max, e.value);
        }
      }
    }
  }
  for (const auto& [id, range] : seen) {
    index_.emplace(id, ids_.size());
    ids_.push_back(id);
    ranges_.push_back(range);
  }
}

std::pair<double, double> LabVocab::normalize(const LabEvent& e) const {
  if (!std::isfinite(e.value)) throw DataError(fmt::format("lab test {}: non-finite value", e.test_id));
  const double n = static_cast<double>(std::max<std::size_t>(ids_.size(), 1));
  auto it = index_.find(e.test_id);
  if (it == index_.end()) return {static_cast<double>(ids_.size()) / n, 0.5};
  const auto& r = ranges_[it->second];
  const double span = r.max - r.min;
  const double v = span > 0.0 ? (e.value - r.min) / span : 0.5;
  return {static_cast<double>(it->second) / n, v};
}

Vocabularies build_vocabularies(const std::vector<PatientRecord>& records) {
  if (records.empty()) throw DataError("build_vocabularies: no records");
  std::vector<std::string> d, p, m;
  for (const auto& r : records) {
    for (const auto& v : r.visits) {
      d.insert(d.end(), v.diagnoses.begin(), v.diagnoses.end());
      p.insert(p.end(), v.procedures.begin(), v.procedures.end());
      m.insert(m.end(), v.medications.begin(), v.medications.end());
    }
  }
  return Vocabularies{CodeVocab(std::move(d)), CodeVocab(std::move(p)), CodeVocab(std::move(m)), LabVocab(records)};
}

void DdiGraph::add_edge(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_) throw DataError(fmt::format("DDI edge ({}, {}) outside vocabulary of {}", i, j, n_));
  if (i == j) throw DataError(fmt::format("DDI self-edge on medication {}", i));
  adj_[i * n_ + j] = 1;
  adj_[j * n_ + i] = 1;
}

std::size_t DdiGraph::edge_count() const { return edges().size(); }

std::vector<std::pair<std::size_t, std::size_t>> DdiGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (edge(i, j)) out.emplace_back(i, j);
  return out;
}

bool DdiGraph::is_valid() const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (adj_[i * n_ + i] != 0) return false;
    for (std::size_t j = 0; j < n_; ++j) {
      if (adj_[i * n_ + j] > 1 || adj_[i * n_ + j] != adj_[j * n_ + i]) return false;
    }
  }
  return true;
}

namespace {

std::vector<std::size_t> encode_codes(const std::vector<std::string>& codes, const CodeVocab& vocab) {
  std::vector<std::size_t> out;
  out.reserve(codes.size());
  for (const auto& c : codes) out.push_back(vocab.index(c));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

EncodedPatient encode_patient(const PatientRecord& record, const Vocabularies& vocab) {
  EncodedPatient p;
  p.patient_id = record.patient_id;
  p.visits.reserve(record.visits.size());
  for (const auto& v : record.visits) {
    EncodedVisit e;
    e.diagnoses = encode_codes(v.diagnoses, vocab.diag);
    e.procedures = encode_codes(v.procedures, vocab.proc);
    e.medications = encode_codes(v.medications, vocab.med);
    for (const auto& l : v.labs) {
      auto [id, value] = vocab.labs.normalize(l);
      e.labs.push_back({id, value});
    }
    e.gender = v.gender;
    e.age = v.age;
    p.visits.push_back(std::move(e));
  }
  return p;
}

std::vector<EncodedPatient> encode_patients(const std::vector<PatientRecord>& records, const Vocabularies& vocab) {
  std::vector<EncodedPatient> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_patient(r, vocab));
  return out;
}

DatasetSplit split_patients(const std::vector<PatientRecord>& records, SplitFractions f, std::uint64_t seed) {
  if (f.train < 0 || f.validation < 0 || f.test < 0 || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw DataError(fmt::format("split fractions {}/{}/{} must be non-negative and sum to 1", f.train, f.validation,
                                f.test));
  }
  const std::size_t n = records.size();
  const auto n_val = static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(f.test * static_cast<double>(n)));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw DataError(fmt::format("split of {} patients into {}/{}/{} leaves an empty part", n,
                                n - std::min(n, n_val + n_test), n_val, n_test));
  }
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.patient_id).second) throw DataError(fmt::format("duplicate patient id '{}'", r.patient_id));
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).split("patient-split");
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  // 0 = train, 1 = validation, 2 = test; lists keep record order.
  std::vector<int> part(n, 0);
  for (std::size_t k = 0; k < n_val; ++k) part[order[k]] = 1;
  for (std::size_t k = n_val; k < n_val + n_test; ++k) part[order[k]] = 2;
  DatasetSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = part[i] == 0 ? s.train : (part[i] == 1 ? s.validation : s.test);
    dst.push_back(records[i].patient_id);
  }
  return s;
}

std::vector<PatientRecord> select_patients(const std::vector<PatientRecord>& records,
                                           const std::vector<std::string>& ids) {
  std::unordered_set<std::string> want(ids.begin(), ids.end());
  std::vector<PatientRecord> out;
  for (const auto& r : records) {
    if (want.count(r.patient_id)) out.push_back(r);
  }
  if (out.size() != want.size()) {
    throw DataError(fmt::format("select_patients: {} of {} requested ids not found", want.size() - out.size(),
                                want.size()));
  }
  return out;
}

}  // namespace gdm::ehr
