#include "gdm/ehr/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace gdm::ehr {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

[[noreturn]] void fail(std::size_t line, std::string_view field, std::string_view what) {
  throw DataError(fmt::format("line {}: field '{}': {}", line, field, what));
}

std::vector<std::string> read_codes(const json& visit, const char* key, std::size_t line, const CodeVocab* vocab) {
  auto it = visit.find(key);
  if (it == visit.end()) fail(line, key, "missing");
  if (!it->is_array()) fail(line, key, "expected array of strings");
  std::vector<std::string> out;
  for (const auto& c : *it) {
    if (!c.is_string()) fail(line, key, "expected array of strings");
    auto code = c.get<std::string>();
    if (vocab && !vocab->contains(code)) fail(line, key, fmt::format("unknown code '{}'", code));
    out.push_back(std::move(code));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Visit parse_visit(const json& j, std::size_t line, const Vocabularies* vocab) {
  if (!j.is_object()) fail(line, "visits", "expected objects");
  Visit v;
  v.diagnoses = read_codes(j, "diag", line, vocab ? &vocab->diag : nullptr);
  v.procedures = read_codes(j, "proc", line, vocab ? &vocab->proc : nullptr);
  v.medications = read_codes(j, "med", line, vocab ? &vocab->med : nullptr);

  if (auto it = j.find("labs"); it != j.end()) {
    if (!it->is_array()) fail(line, "labs", "expected array of [int, float] pairs");
    for (const auto& e : *it) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number()) {
        fail(line, "labs", "expected array of [int, float] pairs");
      }
      const double value = e[1].get<double>();
      if (!std::isfinite(value)) fail(line, "labs", "non-finite value");
      v.labs.push_back({e[0].get<int>(), value});
    }
  }

  auto g = j.find("gender");
  if (g == j.end() || !g->is_number_integer()) fail(line, "gender", "expected 0 or 1");
  v.gender = g->get<int>();
  if (v.gender != 0 && v.gender != 1) fail(line, "gender", "expected 0 or 1");

  auto a = j.find("age");
  if (a == j.end() || !a->is_number()) fail(line, "age", "expected non-negative number");
  v.age = a->get<double>();
  if (!std::isfinite(v.age) || v.age < 0.0) fail(line, "age", "expected non-negative number");
  return v;
}

}  // namespace

LoadedRecords parse_records(std::istream& in, const Vocabularies* vocab) {
  LoadedRecords out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(fmt::format("line {}: malformed record: {}", line, e.what()));
    }
    if (!j.is_object()) fail(line, "<record>", "expected object");
    PatientRecord r;
    auto id = j.find("patient_id");
    if (id == j.end() || !id->is_string()) fail(line, "patient_id", "expected string");
    r.patient_id = id->get<std::string>();
    auto visits = j.find("visits");
    if (visits == j.end() || !visits->is_array()) fail(line, "visits", "expected array");
    for (const auto& v : *visits) r.visits.push_back(parse_visit(v, line, vocab));
    if (r.visits.size() < 2) {
      ++out.single_visit_excluded;
      continue;
    }
    out.records.push_back(std::move(r));
  }
  if (out.single_visit_excluded > 0) {
    std::cerr << "warning: excluded " << out.single_visit_excluded << " patient(s) with fewer than 2 visits\n";
  }
  return out;
}

LoadedRecords load_records(const std::filesystem::path& path, const Vocabularies* vocab) {
  auto in = open_in(path);
  return parse_records(in, vocab);
}

std::string record_to_line(const PatientRecord& r) {
  json visits = json::array();
  for (const auto& v : r.visits) {
    json labs = json::array();
    for (const auto& e : v.labs) labs.push_back(json::array({e.test_id, e.value}));
    visits.push_back(json{{"diag", v.diagnoses},
                          {"proc", v.procedures},
                          {"med", v.medications},
                          {"labs", labs},
                          {"gender", v.gender},
                          {"age", v.age}});
  }
  json j{{"patient_id", r.patient_id}, {"visits", visits}};
  return j.dump();
}

void write_records(const std::filesystem::path& path, const std::vector<PatientRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records) out << record_to_line(r) << '\n';
}

LoadedDdi load_ddi_edges(const std::filesystem::path& path, const CodeVocab& med_vocab) {
  auto in = open_in(path);
  LoadedDdi out{DdiGraph(med_vocab.size()), 0};
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream ss(text);
    std::string a, b, extra;
    if (!(ss >> a)) continue;
    if (!(ss >> b) || (ss >> extra)) throw DataError(fmt::format("{}:{}: expected two medication codes", path.string(), line));
    if (!med_vocab.contains(a) || !med_vocab.contains(b)) {
      throw DataError(fmt::format("{}:{}: unknown medication code '{}'", path.string(), line,
                                  med_vocab.contains(a) ? b : a));
    }
    const auto i = med_vocab.index(a), j = med_vocab.index(b);
    if (i == j) {
      ++out.self_edges_ignored;
      continue;
    }
    out.graph.add_edge(i, j);
  }
  if (out.self_edges_ignored > 0) {
    std::cerr << "warning: ignored " << out.self_edges_ignored << " DDI self-edge(s) in " << path.string() << "\n";
  }
  return out;
}

void write_ddi_edges(const std::filesystem::path& path, const DdiGraph& graph, const CodeVocab& med_vocab) {
  auto out = open_out(path);
  for (auto [i, j] : graph.edges()) out << med_vocab.code(i) << '\t' << med_vocab.code(j) << '\n';
}

EffectMatrix load_causal_matrix(const std::filesystem::path& path, const CodeVocab& row_vocab,
                                const CodeVocab& med_vocab) {
  auto in = open_in(path);
  EffectMatrix m(row_vocab.size(), med_vocab.size());
  std::map<std::pair<std::size_t, std::size_t>, double> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream ss(text);
    std::string row, med, value_text, extra;
    if (!(ss >> row)) continue;
    if (!(ss >> med >> value_text) || (ss >> extra)) {
      throw DataError(fmt::format("{}:{}: expected 'row_code med_code value'", path.string(), line));
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(value_text, &used);
      if (used != value_text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: invalid value '{}'", path.string(), line, value_text));
    }
    if (!std::isfinite(value) || value < 0.0) {
      throw DataError(fmt::format("{}:{}: effect strength must be finite and non-negative, got {}", path.string(),
                                  line, value_text));
    }
    if (!row_vocab.contains(row)) throw DataError(fmt::format("{}:{}: unknown code '{}'", path.string(), line, row));
    if (!med_vocab.contains(med)) throw DataError(fmt::format("{}:{}: unknown medication code '{}'", path.string(), line, med));
    const auto key = std::make_pair(row_vocab.index(row), med_vocab.index(med));
    auto [it, fresh] = seen.emplace(key, value);
    if (!fresh && it->second != value) {
      throw DataError(fmt::format("{}:{}: conflicting duplicate for ({}, {}): {} vs {}", path.string(), line, row, med,
                                  it->second, value));
    }
    m(key.first, key.second) = value;
  }
  return m;
}

void write_causal_matrix(const std::filesystem::path& path, const EffectMatrix& m, const CodeVocab& row_vocab,
                         const CodeVocab& med_vocab) {
  auto out = open_out(path);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (m(r, c) != 0.0) out << row_vocab.code(r) << '\t' << med_vocab.code(c) << '\t' << fmt::format("{}", m(r, c)) << '\n';
    }
  }
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  auto out = open_out(path);
  out << json{{"train", split.train}, {"validation", split.validation}, {"test", split.test}}.dump(1) << '\n';
}

DatasetSplit load_split(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    json j = json::parse(in);
    return DatasetSplit{j.at("train").get<std::vector<std::string>>(), j.at("validation").get<std::vector<std::string>>(),
                        j.at("test").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: malformed split file: {}", path.string(), e.what()));
  }
}

}  // namespace gdm::ehr
