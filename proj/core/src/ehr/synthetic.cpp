#include "gdm/ehr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gdm/autodiff/rng.hpp"
#include "gdm/ehr/io.hpp"

namespace gdm::ehr {

using nlohmann::json;

SyntheticConfig synthetic_config_from_json(const json& j) {
  SyntheticConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
  };
  try {
    get("n_patients", c.n_patients);
    get("n_diag", c.n_diag);
    get("n_proc", c.n_proc);
    get("n_med", c.n_med);
    get("n_lab_tests", c.n_lab_tests);
    get("mean_visits", c.mean_visits);
    get("min_diag_per_visit", c.min_diag_per_visit);
    get("max_diag_per_visit", c.max_diag_per_visit);
    get("max_meds_per_diag", c.max_meds_per_diag);
    get("noise_rate", c.noise_rate);
    get("confounder_rate", c.confounder_rate);
    get("n_ddi_pairs", c.n_ddi_pairs);
    if (auto it = j.find("split"); it != j.end()) {
      const auto v = it->get<std::vector<double>>();
      if (v.size() != 3) throw DataError("split must list three fractions");
      c.split = {v[0], v[1], v[2]};
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid generator config: {}", e.what()));
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known{"n_patients", "n_diag", "n_proc", "n_med", "n_lab_tests",
                                             "mean_visits", "min_diag_per_visit", "max_diag_per_visit",
                                             "max_meds_per_diag", "noise_rate", "confounder_rate", "n_ddi_pairs",
                                             "split", "seed"};
    if (!known.count(it.key())) throw DataError(fmt::format("invalid generator config: unknown key '{}'", it.key()));
  }
  validate(c);
  return c;
}

json synthetic_config_to_json(const SyntheticConfig& c) {
  return json{{"n_patients", c.n_patients},
              {"n_diag", c.n_diag},
              {"n_proc", c.n_proc},
              {"n_med", c.n_med},
              {"n_lab_tests", c.n_lab_tests},
              {"mean_visits", c.mean_visits},
              {"min_diag_per_visit", c.min_diag_per_visit},
              {"max_diag_per_visit", c.max_diag_per_visit},
              {"max_meds_per_diag", c.max_meds_per_diag},
              {"noise_rate", c.noise_rate},
              {"confounder_rate", c.confounder_rate},
              {"n_ddi_pairs", c.n_ddi_pairs},
              {"split", {c.split.train, c.split.validation, c.split.test}}};
}

void validate(const SyntheticConfig& c) {
  auto bad = [](std::string msg) { throw DataError("invalid generator config: " + msg); };
  if (c.n_patients < 3) bad("n_patients must be at least 3");
  if (c.n_diag == 0 || c.n_proc == 0 || c.n_med == 0 || c.n_lab_tests == 0) bad("vocabulary sizes must be positive");
  if (!(c.mean_visits >= 2.0)) bad("mean_visits must be >= 2 (single-visit patients are filtered)");
  if (c.min_diag_per_visit == 0 || c.max_diag_per_visit < c.min_diag_per_visit) bad("diagnoses per visit range");
  if (c.max_diag_per_visit > c.n_diag) bad("max_diag_per_visit exceeds n_diag");
  if (c.max_meds_per_diag == 0 || c.max_meds_per_diag > c.n_med) bad("max_meds_per_diag out of range");
  if (!(c.noise_rate >= 0.0 && c.noise_rate <= 1.0)) bad("noise_rate outside [0, 1]");
  if (!(c.confounder_rate >= 0.0 && c.confounder_rate <= 1.0)) bad("confounder_rate outside [0, 1]");
  const std::size_t possible = c.n_med * (c.n_med - 1) / 2;
  if (c.n_ddi_pairs > possible) bad(fmt::format("n_ddi_pairs {} exceeds {} possible pairs", c.n_ddi_pairs, possible));
}

namespace {

std::string code(char prefix, std::size_t i, std::size_t n) {
  std::size_t width = 2;
  for (std::size_t m = n; m >= 100; m /= 10) ++width;
  return fmt::format("{}{:0{}}", prefix, i, width);
}

double round_to(double v, double q) { return std::round(v / q) * q; }

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

struct Structure {
  std::vector<std::vector<std::size_t>> meds_of_diag;
  std::vector<std::size_t> proc_of_diag;
  std::vector<std::size_t> lab_of_diag;
  std::vector<double> lab_base;
  std::vector<double> lab_shift;
};

Structure plant_structure(const SyntheticConfig& c, Rng rng) {
  Structure s;
  s.meds_of_diag.resize(c.n_diag);
  auto med_perm = iota(c.n_med);
  shuffle(med_perm, rng);
  // Round-robin first so every medication is implied by some diagnosis.
  for (std::size_t k = 0; k < c.n_med; ++k) s.meds_of_diag[k % c.n_diag].push_back(med_perm[k]);
  for (auto& meds : s.meds_of_diag) {
    const std::size_t target = std::max<std::size_t>(meds.size(), 1 + rng.below(c.max_meds_per_diag));
    while (meds.size() < target) {
      const std::size_t m = rng.below(c.n_med);
      if (std::find(meds.begin(), meds.end(), m) == meds.end()) meds.push_back(m);
    }
  }
  if (c.n_med >= 2 && c.n_ddi_pairs > 0 && s.meds_of_diag[0].size() < 2) {
    const std::size_t m = s.meds_of_diag[0][0] == med_perm[0] ? med_perm[1] : med_perm[0];
    s.meds_of_diag[0].push_back(m);
  }
  for (auto& meds : s.meds_of_diag) std::sort(meds.begin(), meds.end());

  auto proc_perm = iota(c.n_proc);
  shuffle(proc_perm, rng);
  s.proc_of_diag.resize(c.n_diag);
  for (std::size_t d = 0; d < c.n_diag; ++d) s.proc_of_diag[d] = proc_perm[d % c.n_proc];

  s.lab_of_diag.resize(c.n_diag);
  s.lab_shift.resize(c.n_diag);
  for (std::size_t d = 0; d < c.n_diag; ++d) {
    s.lab_of_diag[d] = rng.below(c.n_lab_tests);
    s.lab_shift[d] = rng.normal();
  }
  s.lab_base.resize(c.n_lab_tests);
  for (auto& b : s.lab_base) b = rng.uniform(2.0, 10.0);
  return s;
}

struct DrawnVisit {
  std::set<std::size_t> diag, proc, med;
  std::vector<LabEvent> labs;
  double age = 0.0;
};

void add_diag_effects(DrawnVisit& v, std::size_t d, const Structure& s, Rng& rng) {
  v.diag.insert(d);
  v.proc.insert(s.proc_of_diag[d]);
  const std::size_t t = s.lab_of_diag[d];
  v.labs.push_back({static_cast<int>(t + 1), round_to(s.lab_base[t] + s.lab_shift[d] + 0.5 * rng.normal(), 1e-3)});
}

}  // namespace

CausalEffectMatrices empirical_causal_effects(const std::vector<EncodedPatient>& patients, std::size_t n_diag,
                                              std::size_t n_proc, std::size_t n_med) {
  CausalEffectMatrices out{EffectMatrix(n_diag, n_med), EffectMatrix(n_proc, n_med)};
  std::vector<double> diag_count(n_diag, 0.0), proc_count(n_proc, 0.0);
  for (const auto& p : patients) {
    for (const auto& v : p.visits) {
      for (auto d : v.diagnoses) {
        diag_count[d] += 1.0;
        for (auto m : v.medications) out.diag_to_med(d, m) += 1.0;
      }
      for (auto q : v.procedures) {
        proc_count[q] += 1.0;
        for (auto m : v.medications) out.proc_to_med(q, m) += 1.0;
      }
    }
  }
  for (std::size_t d = 0; d < n_diag; ++d)
    for (std::size_t m = 0; m < n_med; ++m)
      if (diag_count[d] > 0) out.diag_to_med(d, m) /= diag_count[d];
  for (std::size_t q = 0; q < n_proc; ++q)
    for (std::size_t m = 0; m < n_med; ++m)
      if (proc_count[q] > 0) out.proc_to_med(q, m) /= proc_count[q];
  return out;
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& c, std::uint64_t seed) {
  validate(c);
  Rng root = Rng(seed).split("synthetic");
  const Structure s = plant_structure(c, root.split("structure"));
  Rng rng = root.split("patients");

  std::vector<std::vector<DrawnVisit>> patients(c.n_patients);
  std::vector<int> genders(c.n_patients);
  for (std::size_t p = 0; p < c.n_patients; ++p) {
    const std::size_t n_visits = 2 + static_cast<std::size_t>(rng.poisson(c.mean_visits - 2.0));
    genders[p] = rng.bernoulli(0.5) ? 1 : 0;
    double age = rng.uniform(20.0, 90.0);
    std::vector<std::size_t> chronic;
    const std::size_t n_chronic = std::min<std::size_t>(1 + rng.below(2), c.min_diag_per_visit + 1);
    while (chronic.size() < std::min(n_chronic, c.max_diag_per_visit)) {
      const std::size_t d = rng.below(c.n_diag);
      if (std::find(chronic.begin(), chronic.end(), d) == chronic.end()) chronic.push_back(d);
    }
    for (std::size_t t = 0; t < n_visits; ++t) {
      DrawnVisit v;
      if (t > 0) age += rng.uniform(0.1, 2.0);
      v.age = round_to(age, 0.01);
      const std::size_t k = c.min_diag_per_visit + rng.below(c.max_diag_per_visit - c.min_diag_per_visit + 1);
      std::set<std::size_t> diags;
      for (auto d : chronic) {
        if (diags.size() < k) diags.insert(d);
      }
      while (diags.size() < k) diags.insert(rng.below(c.n_diag));
      for (auto d : diags) add_diag_effects(v, d, s, rng);
      if (rng.bernoulli(0.2)) v.proc.insert(rng.below(c.n_proc));
      for (auto d : diags) v.med.insert(s.meds_of_diag[d].begin(), s.meds_of_diag[d].end());
      for (std::size_t m = 0; m < c.n_med; ++m) {
        if (rng.bernoulli(c.noise_rate)) {
          if (!v.med.erase(m)) v.med.insert(m);
        }
      }
      if (rng.bernoulli(c.confounder_rate) && v.med.size() < c.n_med) {
        std::size_t m = rng.below(c.n_med);
        while (v.med.count(m)) m = rng.below(c.n_med);
        v.med.insert(m);
      }
      patients[p].push_back(std::move(v));
    }
  }

  // Make the vocabularies exactly the configured sizes.
  auto random_visit = [&]() -> DrawnVisit& {
    auto& pv = patients[rng.below(c.n_patients)];
    return pv[rng.below(pv.size())];
  };
  auto visits_with = [&](auto pred) {
    std::vector<DrawnVisit*> out;
    for (auto& pv : patients)
      for (auto& v : pv)
        if (pred(v)) out.push_back(&v);
    return out;
  };
  auto used = [&](auto member, std::size_t n) {
    std::vector<bool> seen(n, false);
    for (auto& pv : patients)
      for (auto& v : pv)
        for (auto x : v.*member) seen[x] = true;
    return seen;
  };
  {
    auto seen = used(&DrawnVisit::diag, c.n_diag);
    for (std::size_t d = 0; d < c.n_diag; ++d) {
      if (seen[d]) continue;
      auto& v = random_visit();
      add_diag_effects(v, d, s, rng);
      v.med.insert(s.meds_of_diag[d].begin(), s.meds_of_diag[d].end());
    }
  }
  {
    auto seen = used(&DrawnVisit::med, c.n_med);
    for (std::size_t m = 0; m < c.n_med; ++m) {
      if (seen[m]) continue;
      auto hosts = visits_with([&](const DrawnVisit& v) {
        return std::any_of(v.diag.begin(), v.diag.end(), [&](std::size_t d) {
          return std::binary_search(s.meds_of_diag[d].begin(), s.meds_of_diag[d].end(), m);
        });
      });
      (hosts.empty() ? &random_visit() : hosts[rng.below(hosts.size())])->med.insert(m);
    }
  }
  {
    auto seen = used(&DrawnVisit::proc, c.n_proc);
    for (std::size_t q = 0; q < c.n_proc; ++q) {
      if (!seen[q]) random_visit().proc.insert(q);
    }
  }

  SyntheticCorpus corpus;
  std::vector<std::string> dcodes, pcodes, mcodes;
  for (std::size_t i = 0; i < c.n_diag; ++i) dcodes.push_back(code('D', i, c.n_diag));
  for (std::size_t i = 0; i < c.n_proc; ++i) pcodes.push_back(code('P', i, c.n_proc));
  for (std::size_t i = 0; i < c.n_med; ++i) mcodes.push_back(code('M', i, c.n_med));

  for (std::size_t p = 0; p < c.n_patients; ++p) {
    PatientRecord r;
    r.patient_id = fmt::format("patient_{:05}", p);
    for (const auto& dv : patients[p]) {
      Visit v;
      for (auto d : dv.diag) v.diagnoses.push_back(dcodes[d]);
      for (auto q : dv.proc) v.procedures.push_back(pcodes[q]);
      for (auto m : dv.med) v.medications.push_back(mcodes[m]);
      v.labs = dv.labs;
      v.gender = genders[p];
      v.age = dv.age;
      r.visits.push_back(std::move(v));
    }
    corpus.records.push_back(std::move(r));
  }

  corpus.vocab = build_vocabularies(corpus.records);
  corpus.meds_of_diag = s.meds_of_diag;

  corpus.ddi = DdiGraph(c.n_med);
  if (c.n_ddi_pairs > 0) {
    corpus.planted_pair = {s.meds_of_diag[0][0], s.meds_of_diag[0][1]};
    corpus.ddi.add_edge(corpus.planted_pair.first, corpus.planted_pair.second);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < c.n_med; ++i)
      for (std::size_t j = i + 1; j < c.n_med; ++j)
        if (std::make_pair(i, j) != corpus.planted_pair) pairs.emplace_back(i, j);
    Rng drng = root.split("ddi");
    shuffle(pairs, drng);
    for (std::size_t k = 0; k + 1 < c.n_ddi_pairs; ++k) corpus.ddi.add_edge(pairs[k].first, pairs[k].second);
  }

  corpus.split = split_patients(corpus.records, c.split, seed);
  auto train = encode_patients(select_patients(corpus.records, corpus.split.train), corpus.vocab);
  corpus.causal = empirical_causal_effects(train, c.n_diag, c.n_proc, c.n_med);

  auto& st = corpus.stats;
  st.n_patients = corpus.records.size();
  double pairs = 0, interacting = 0, meds = 0;
  for (const auto& pv : patients) {
    st.n_visits += pv.size();
    for (const auto& v : pv) {
      meds += static_cast<double>(v.med.size());
      std::vector<std::size_t> ms(v.med.begin(), v.med.end());
      for (std::size_t a = 0; a < ms.size(); ++a)
        for (std::size_t b = a + 1; b < ms.size(); ++b) {
          pairs += 1;
          interacting += corpus.ddi(ms[a], ms[b]);
        }
    }
  }
  st.avg_visits = static_cast<double>(st.n_visits) / static_cast<double>(st.n_patients);
  st.avg_meds_per_visit = meds / static_cast<double>(st.n_visits);
  st.n_diag = corpus.vocab.diag.size();
  st.n_proc = corpus.vocab.proc.size();
  st.n_med = corpus.vocab.med.size();
  st.n_ddi_pairs = corpus.ddi.edge_count();
  st.ground_truth_ddi_rate = pairs > 0 ? interacting / pairs : 0.0;
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus, const SyntheticConfig& config,
                  std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  write_records(dir / "records.jsonl", corpus.records);
  write_ddi_edges(dir / "ddi.tsv", corpus.ddi, corpus.vocab.med);
  write_causal_matrix(dir / "causal_diag.tsv", corpus.causal.diag_to_med, corpus.vocab.diag, corpus.vocab.med);
  write_causal_matrix(dir / "causal_proc.tsv", corpus.causal.proc_to_med, corpus.vocab.proc, corpus.vocab.med);
  write_split(dir / "split.json", corpus.split);
  const auto& st = corpus.stats;
  json manifest{{"generator", "graphdiffmed-synthetic"},
                {"seed", seed},
                {"config", synthetic_config_to_json(config)},
                {"stats",
                 {{"n_patients", st.n_patients},
                  {"n_visits", st.n_visits},
                  {"avg_visits", st.avg_visits},
                  {"avg_meds_per_visit", st.avg_meds_per_visit},
                  {"n_diag", st.n_diag},
                  {"n_proc", st.n_proc},
                  {"n_med", st.n_med},
                  {"n_ddi_pairs", st.n_ddi_pairs},
                  {"ground_truth_ddi_rate", st.ground_truth_ddi_rate}}},
                {"split_sizes", {corpus.split.train.size(), corpus.split.validation.size(), corpus.split.test.size()}},
                {"files", {"records.jsonl", "ddi.tsv", "causal_diag.tsv", "causal_proc.tsv", "split.json"}}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", (dir / "manifest.json").string()));
  out << manifest.dump(2) << '\n';
}

}  // namespace gdm::ehr
