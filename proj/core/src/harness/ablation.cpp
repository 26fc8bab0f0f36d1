#include "gdm/harness/ablation.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace gdm::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Arm::slug() const {
  std::string s;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (c == '-') {
      s += "base";
    } else if (!s.empty() && s.back() != '_') {
      s += '_';
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

RunConfig Arm::apply(RunConfig base) const {
  base.attn = attn;
  base.graph_bias = graph_bias;
  base.modality = modality;
  if (lambda_graph) base.lambda_graph = *lambda_graph;
  return base;
}

std::vector<Arm> standard_arms() {
  using model::AttnVariant;
  using model::ModalityConfig;
  std::vector<Arm> arms{{kBaselineArm, AttnVariant::kV1, false, ModalityConfig{}, std::nullopt}};
  for (const char* m : {"-", "L", "GY", "LGY"})
    arms.push_back({fmt::format("Dual v2 ({})", m), AttnVariant::kDualV2, false, ModalityConfig::parse(m), std::nullopt});
  for (const char* m : {"-", "L", "GY", "LGY"})
    arms.push_back({fmt::format("GraphDiffMed ({})", m), AttnVariant::kDualV2, true, ModalityConfig::parse(m),
                    std::nullopt});
  return arms;
}

Arm kill_switch_arm() {
  return {"GraphDiffMed (-, lambda 0)", model::AttnVariant::kDualV2, true, model::ModalityConfig{}, 0.0};
}

GridConfig grid_config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("grid config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "run" && it.key() != "seeds" && it.key() != "arms" && it.key() != "kill_switch_pair") {
      throw std::invalid_argument(fmt::format("grid config: unknown key '{}'", it.key()));
    }
  }
  GridConfig g;
  try {
    if (auto it = j.find("run"); it != j.end()) g.base = run_config_from_json(*it);
    if (auto it = j.find("seeds"); it != j.end()) g.seeds = it->get<std::vector<std::uint64_t>>();
    if (auto it = j.find("kill_switch_pair"); it != j.end()) g.kill_switch_pair = it->get<bool>();
    if (auto it = j.find("arms"); it != j.end()) {
      const auto all = standard_arms();
      g.arms.clear();
      for (const auto& name : it->get<std::vector<std::string>>()) {
        auto found = std::find_if(all.begin(), all.end(), [&](const Arm& a) { return a.name == name || a.slug() == name; });
        if (found == all.end()) throw std::invalid_argument(fmt::format("grid config: unknown arm '{}'", name));
        g.arms.push_back(*found);
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("grid config: {}", e.what()));
  }
  if (g.seeds.empty()) throw std::invalid_argument("grid config: no seeds");
  if (g.arms.empty()) throw std::invalid_argument("grid config: no arms");
  return g;
}

bool same_metrics(const EvalResult& a, const EvalResult& b) {
  for (auto m : objective::kMetricNames) {
    if (objective::metric_value(a.point, m) != objective::metric_value(b.point, m)) return false;
    if (a.bootstrap.summary(m).mean != b.bootstrap.summary(m).mean) return false;
    if (a.bootstrap.summary(m).std != b.bootstrap.summary(m).std) return false;
  }
  return true;
}

namespace {

std::vector<double> seed_values(const AblationResult& r, const std::string& arm, std::string_view metric) {
  std::vector<double> v;
  for (const auto& c : r.cells)
    if (c.ok && c.arm == arm) v.push_back(c.eval.bootstrap.summary(metric).mean);
  return v;
}

void set_metric(objective::MetricValues& m, std::string_view name, double x) {
  if (name == "jaccard") m.jaccard = x;
  if (name == "f1") m.f1 = x;
  if (name == "prauc") m.prauc = x;
  if (name == "ddi_rate") m.ddi_rate = x;
  if (name == "avg_meds") m.avg_meds = x;
}

}  // namespace

AblationResult run_ablation(const Dataset& data, const GridConfig& grid, const fs::path& out_dir,
                            const ProgressCallback& progress) {
  auto arms = grid.arms;
  const bool have_reference =
      std::any_of(arms.begin(), arms.end(), [](const Arm& a) { return a.name == kKillSwitchReference; });
  if (grid.kill_switch_pair && have_reference) arms.push_back(kill_switch_arm());

  AblationResult r;
  for (const auto& arm : arms) {
    for (auto seed : grid.seeds) {
      CellResult cell;
      cell.arm = arm.name;
      cell.seed = seed;
      try {
        auto cfg = arm.apply(grid.base);
        cfg.seed = seed;
        cfg.validate();
        cell.config_hash = cfg.hash();
        const fs::path dir = out_dir.empty() ? fs::path{} : out_dir / "runs" / arm.slug() / fmt::format("seed-{}", seed);
        auto outcome = run_train_eval(data, cfg, dir);
        cell.best_epoch = outcome.train.best_epoch;
        cell.eval = std::move(outcome.eval);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (progress) progress(cell);
      r.cells.push_back(std::move(cell));
    }
  }

  for (const auto& arm : arms) {
    ArmSummary s;
    s.arm = arm.name;
    for (auto metric : objective::kMetricNames) {
      const auto v = seed_values(r, arm.name, metric);
      s.seeds_ok = v.size();
      const auto ms = objective::mean_std(v);
      set_metric(s.mean, metric, ms.mean);
      set_metric(s.std, metric, ms.std);
    }
    r.arms.push_back(s);
  }

  auto compare = [&](const std::string& arm, const std::string& reference) {
    for (auto metric : objective::kMetricNames) {
      const auto a = seed_values(r, arm, metric), b = seed_values(r, reference, metric);
      if (a.size() < 2 || b.size() < 2) continue;
      r.significance.push_back({arm, reference, std::string(metric), objective::welch_test(a, b)});
    }
  };
  const bool have_baseline = std::any_of(arms.begin(), arms.end(), [](const Arm& a) { return a.name == kBaselineArm; });
  if (have_baseline)
    for (const auto& arm : arms)
      if (arm.name != kBaselineArm) compare(arm.name, kBaselineArm);

  if (grid.kill_switch_pair && have_reference) {
    KillSwitchCheck k{kill_switch_arm().name, kKillSwitchReference, true};
    for (auto seed : grid.seeds) {
      const CellResult *a = nullptr, *b = nullptr;
      for (const auto& c : r.cells) {
        if (c.seed != seed) continue;
        if (c.arm == k.arm) a = &c;
        if (c.arm == k.reference) b = &c;
      }
      if (!a || !b || !a->ok || !b->ok || !same_metrics(a->eval, b->eval)) k.identical = false;
    }
    r.kill_switch = k;
    compare(k.arm, k.reference);
  }
  if (!out_dir.empty()) write_ablation(out_dir, r);
  return r;
}

std::string ablation_table_csv(const AblationResult& r) {
  std::string out = "arm,seeds_ok";
  for (auto m : objective::kMetricNames) out += fmt::format(",{0}_mean,{0}_std", m);
  out += "\n";
  for (const auto& a : r.arms) {
    out += fmt::format("{},{}", csv_field(a.arm), a.seeds_ok);
    for (auto m : objective::kMetricNames)
      out += fmt::format(",{:.10f},{:.10f}", objective::metric_value(a.mean, m), objective::metric_value(a.std, m));
    out += "\n";
  }
  return out;
}

std::string ablation_table_text(const AblationResult& r) {
  std::string out = fmt::format("{:<28}", "arm");
  for (auto m : objective::kMetricNames) out += fmt::format(" {:>17}", m);
  out += "\n";
  for (const auto& a : r.arms) {
    out += fmt::format("{:<28}", a.arm);
    for (auto m : objective::kMetricNames) {
      out += fmt::format(" {:>17}", fmt::format("{:.4f} +- {:.4f}", objective::metric_value(a.mean, m),
                                                objective::metric_value(a.std, m)));
    }
    out += "\n";
  }
  return out;
}

std::string ablation_seeds_csv(const AblationResult& r) {
  std::string out = "arm,seed,metric,mean,std\n";
  for (const auto& c : r.cells)
    if (c.ok) out += eval_csv(c.arm, c.seed, c.eval, false);
  return out;
}

std::string significance_csv(const AblationResult& r) {
  std::string out = "arm,reference,metric,statistic,df,p_value,degenerate\n";
  for (const auto& s : r.significance) {
    out += fmt::format("{},{},{},{:.10g},{:.10g},{:.10g},{}\n", csv_field(s.arm), csv_field(s.reference), s.metric, s.test.statistic,
                       s.test.df, s.test.p_value, s.test.degenerate ? 1 : 0);
  }
  return out;
}

void write_ablation(const fs::path& out_dir, const AblationResult& r) {
  write_text(out_dir / "ablation_table.csv", ablation_table_csv(r));
  write_text(out_dir / "ablation_table.txt", ablation_table_text(r));
  write_text(out_dir / "ablation_seeds.csv", ablation_seeds_csv(r));
  write_text(out_dir / "significance.csv", significance_csv(r));
  json failures = json::array();
  for (const auto& c : r.cells)
    if (!c.ok) failures.push_back({{"arm", c.arm}, {"seed", c.seed}, {"error", c.error}});
  json summary{{"cells", r.cells.size()}, {"failures", failures}};
  if (r.kill_switch) {
    summary["kill_switch"] = {{"arm", r.kill_switch->arm},
                              {"reference", r.kill_switch->reference},
                              {"identical", r.kill_switch->identical}};
  }
  write_text(out_dir / "ablation.json", summary.dump(2) + "\n");
}

}  // namespace gdm::harness
