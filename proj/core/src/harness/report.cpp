#include "gdm/harness/report.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace gdm::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Series {
  std::string name;
  std::vector<double> values;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

std::string panel(const Series& s, const std::vector<double>& x, double ox, double oy, double w, double h) {
  std::string out = fmt::format("<g transform=\"translate({},{})\">\n", ox, oy);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", w, h);
  out += fmt::format("<text x=\"{}\" y=\"-8\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", w / 2, s.name);
  if (s.values.empty()) return out + "</g>\n";
  double lo = *std::min_element(s.values.begin(), s.values.end());
  double hi = *std::max_element(s.values.begin(), s.values.end());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double x0 = x.front(), x1 = x.size() > 1 ? x.back() : x.front() + 1.0;
  auto px = [&](double v) { return (v - x0) / (x1 - x0) * w; };
  auto py = [&](double v) { return h - (v - lo) / (hi - lo) * h; };
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    out += fmt::format("<text x=\"-6\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"end\">{:.4f}</text>\n", py(v) + 3,
                       v);
  }
  out += fmt::format("<text x=\"0\" y=\"{}\" font-size=\"10\">{:.0f}</text>\n", h + 14, x0);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.0f}</text>\n", w, h + 14, x1);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">epoch</text>\n", w / 2, h + 28);
  std::string pts;
  for (std::size_t i = 0; i < s.values.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", px(x[i]), py(s.values[i]));
  if (!pts.empty()) pts.pop_back();
  out += fmt::format("<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"{}\"/>\n", pts);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"#1f5fa8\"/>\n", px(x[i]), py(s.values[i]));
  return out + "</g>\n";
}

std::string slug_path(const fs::path& rel) {
  std::string s;
  for (const auto& part : rel) {
    if (!s.empty()) s += "__";
    s += part.string();
  }
  return s.empty() || s == "." ? "run" : s;
}

}  // namespace

std::string plot_train_log_svg(const std::string& title, const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ReportError("empty train log");
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "epoch") throw ReportError("train log has no epoch column");
  std::vector<double> epochs;
  std::vector<Series> cols;
  for (std::size_t i = 1; i < header.size(); ++i) cols.push_back({header[i], {}});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw ReportError(fmt::format("train log row '{}' has {} fields", line, f.size()));
    epochs.push_back(std::stod(f[0]));
    for (std::size_t i = 1; i < f.size(); ++i) cols[i - 1].values.push_back(std::stod(f[i]));
  }
  const std::vector<std::string> shown{"train_loss", "val_jaccard", "val_ddi_rate"};
  const double w = 260, h = 180, gap = 90;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\">\n",
      gap + shown.size() * (w + gap), h + 110);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += fmt::format("<text x=\"20\" y=\"22\" font-size=\"15\">{}</text>\n", title);
  for (std::size_t k = 0; k < shown.size(); ++k) {
    auto it = std::find_if(cols.begin(), cols.end(), [&](const Series& s) { return s.name == shown[k]; });
    const Series s = it == cols.end() ? Series{shown[k], {}} : *it;
    out += panel(s, epochs, gap + k * (w + gap), 60, w, h);
  }
  return out + "</svg>\n";
}

AttentionDump dump_attention(const model::Model& model, std::span<const ehr::EncodedPatient> patients) {
  AttentionDump d;
  model::ForwardOptions opts;
  opts.keep_trace = true;
  for (const auto& p : patients) {
    const auto visits = model::forward_patient(model, p, opts);
    for (std::size_t t = 0; t < visits.size(); ++t) {
      const auto& tr = visits[t].inter_trace;
      for (std::size_t head = 0; head < tr.weights.size(); ++head) {
        for (std::size_t j = 0; j < tr.n_kv; ++j) {
          const auto& slot = visits[t].layout.at(j);
          json line{{"patient", p.patient_id},
                    {"visit", t + 1},
                    {"head", head},
                    {"kv_position", j},
                    {"kv_visit", slot.channel == model::Channel::kNull ? 0 : slot.visit + 1},
                    {"modality", std::string(model::channel_name(slot.channel))},
                    {"weight", tr.weights[head][j]}};
          d.weights += line.dump() + "\n";
        }
      }
      for (std::size_t pair = 0; pair < tr.gates.size(); ++pair) {
        json line{{"patient", p.patient_id}, {"visit", t + 1}, {"pair", pair}, {"gate", tr.gates[pair]}};
        d.gates += line.dump() + "\n";
      }
    }
  }
  return d;
}

ReportSummary build_report(const fs::path& artifacts, const fs::path& out, const ReportOptions& options) {
  if (!fs::is_directory(artifacts)) {
    throw ReportError(fmt::format("missing artifacts: '{}' is not a directory", artifacts.string()));
  }
  std::vector<fs::path> logs, checkpoints;
  for (const auto& e : fs::recursive_directory_iterator(artifacts)) {
    if (!e.is_regular_file()) continue;
    if (fs::exists(out) && fs::equivalent(e.path().parent_path(), out)) continue;
    if (e.path().filename() == "train_log.csv") logs.push_back(e.path());
    if (e.path().filename() == "checkpoint.json") checkpoints.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  std::sort(checkpoints.begin(), checkpoints.end());
  const bool has_table = fs::exists(artifacts / "ablation_table.csv");

  std::vector<std::string> missing;
  if (logs.empty() && checkpoints.empty() && !has_table) {
    missing.push_back("train_log.csv");
    missing.push_back("checkpoint.json");
    missing.push_back("ablation_table.csv");
  }
  for (const auto& c : checkpoints)
    if (!fs::exists(c.parent_path() / "train_log.csv")) missing.push_back((c.parent_path() / "train_log.csv").string());
  for (const auto& l : logs)
    if (!fs::exists(l.parent_path() / "checkpoint.json")) missing.push_back((l.parent_path() / "checkpoint.json").string());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw ReportError(fmt::format("missing artifacts under '{}':{}", artifacts.string(), list));
  }

  ReportSummary s;
  for (const auto& log : logs) {
    const auto rel = fs::relative(log.parent_path(), artifacts);
    const auto name = slug_path(rel);
    const auto path = out / "plots" / (name + ".svg");
    write_text(path, plot_train_log_svg(name, read_text(log)));
    s.written.push_back(path);
  }
  std::map<std::string, Dataset> datasets;
  for (const auto& ckpt_path : checkpoints) {
    const auto ckpt = load_checkpoint(ckpt_path);
    auto it = datasets.find(ckpt.config.data_dir + "|" + ckpt.config.records_path + "|" + ckpt.config.ddi_path);
    if (it == datasets.end()) {
      it = datasets.emplace(ckpt.config.data_dir + "|" + ckpt.config.records_path + "|" + ckpt.config.ddi_path,
                            load_run_data(ckpt.config))
               .first;
    }
    const auto& data = it->second;
    auto model = model_from_checkpoint(ckpt, data);
    const auto n = std::min(options.max_patients, data.test.size());
    const auto dump = dump_attention(model, std::span(data.test).first(n));
    const auto name = slug_path(fs::relative(ckpt_path.parent_path(), artifacts));
    write_text(out / "attention" / (name + ".jsonl"), dump.weights);
    write_text(out / "attention" / (name + ".gates.jsonl"), dump.gates);
    s.written.push_back(out / "attention" / (name + ".jsonl"));
    s.written.push_back(out / "attention" / (name + ".gates.jsonl"));
  }
  for (const char* f : {"ablation_table.csv", "ablation_table.txt", "significance.csv", "ablation_seeds.csv"}) {
    if (fs::exists(artifacts / f)) {
      write_text(out / f, read_text(artifacts / f));
      s.written.push_back(out / f);
    }
  }
  return s;
}

}  // namespace gdm::harness
