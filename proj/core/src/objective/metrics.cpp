#include "gdm/objective/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "gdm/autodiff/rng.hpp"
#include "gdm/model/graph_prior.hpp"

namespace gdm::objective {

namespace {

MedSet sorted_unique(std::span<const std::size_t> s) {
  MedSet v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::size_t intersection_size(const MedSet& a, const MedSet& b) {
  std::size_t n = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

}  // namespace

double jaccard(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  auto a = sorted_unique(pred), b = sorted_unique(truth);
  if (a.empty() && b.empty()) return 1.0;
  const auto inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double f1_set(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  auto a = sorted_unique(pred), b = sorted_unique(truth);
  if (a.empty() && b.empty()) return 1.0;
  const auto inter = static_cast<double>(intersection_size(a, b));
  const double precision = a.empty() ? 0.0 : inter / static_cast<double>(a.size());
  const double recall = b.empty() ? 0.0 : inter / static_cast<double>(b.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::optional<double> prauc_sample(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size()) throw std::invalid_argument(fmt::format("prauc: {} scores vs {} labels", p.size(), y.size()));
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (y[order[rank]] > 0.5) {
      ++hits;
      total += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return total / static_cast<double>(hits);
}

double ddi_rate(const std::vector<MedSet>& sets, const ehr::DdiGraph& ddi) {
  std::size_t hits = 0, pairs = 0;
  for (const auto& s : sets) {
    auto [h, t] = model::ddi_pair_count(s, ddi);
    hits += h;
    pairs += t;
  }
  return pairs == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(pairs);
}

double avg_meds(const std::vector<MedSet>& sets) {
  if (sets.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& s : sets) n += s.size();
  return static_cast<double>(n) / static_cast<double>(sets.size());
}

double metric_value(const MetricValues& m, std::string_view name) {
  if (name == "jaccard") return m.jaccard;
  if (name == "f1") return m.f1;
  if (name == "prauc") return m.prauc;
  if (name == "ddi_rate") return m.ddi_rate;
  if (name == "avg_meds") return m.avg_meds;
  throw std::invalid_argument(fmt::format("unknown metric '{}'", name));
}

MetricValues compute_metrics(std::span<const PatientPredictions> patients, const ehr::DdiGraph& ddi) {
  MetricValues m;
  std::vector<MedSet> preds;
  double prauc_sum = 0.0;
  std::size_t prauc_n = 0;
  for (const auto& patient : patients) {
    for (const auto& v : patient.visits) {
      m.jaccard += jaccard(v.predicted, v.truth);
      m.f1 += f1_set(v.predicted, v.truth);
      std::vector<double> y(v.probabilities.size(), 0.0);
      for (auto t : v.truth) y.at(t) = 1.0;
      if (auto ap = prauc_sample(v.probabilities, y)) {
        prauc_sum += *ap;
        ++prauc_n;
      }
      preds.push_back(v.predicted);
    }
  }
  if (preds.empty()) throw std::invalid_argument("compute_metrics: no visits");
  const double n = static_cast<double>(preds.size());
  m.jaccard /= n;
  m.f1 /= n;
  m.prauc = prauc_n == 0 ? 0.0 : prauc_sum / static_cast<double>(prauc_n);
  m.ddi_rate = ddi_rate(preds, ddi);
  m.avg_meds = avg_meds(preds);
  return m;
}

const MeanStd& BootstrapReport::summary(std::string_view metric) const {
  if (metric == "jaccard") return jaccard;
  if (metric == "f1") return f1;
  if (metric == "prauc") return prauc;
  if (metric == "ddi_rate") return ddi_rate;
  if (metric == "avg_meds") return avg_meds;
  throw std::invalid_argument(fmt::format("unknown metric '{}'", metric));
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  for (double v : values) r.mean += v;
  r.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / n);
  return r;
}

BootstrapReport bootstrap_eval(std::span<const PatientPredictions> patients, const ehr::DdiGraph& ddi,
                               std::uint64_t seed, std::size_t iterations, double fraction) {
  if (patients.size() < 2) {
    throw std::invalid_argument(fmt::format("bootstrap needs at least 2 patients, got {}", patients.size()));
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("bootstrap fraction must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(patients.size())));
  if (k == 0) throw std::invalid_argument("bootstrap subsample would be empty");

  BootstrapReport report;
  const Rng root = Rng(seed).split("bootstrap");
  for (std::size_t it = 0; it < iterations; ++it) {
    auto rng = root.split(it);
    std::vector<std::size_t> idx(patients.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    std::vector<PatientPredictions> sub;
    sub.reserve(k);
    for (auto i : idx) sub.push_back(patients[i]);
    report.per_iteration.push_back(compute_metrics(sub, ddi));
    report.subsamples.push_back(std::move(idx));
  }
  auto summarize = [&](double MetricValues::*field) {
    std::vector<double> v;
    for (const auto& m : report.per_iteration) v.push_back(m.*field);
    return mean_std(v);
  };
  report.jaccard = summarize(&MetricValues::jaccard);
  report.f1 = summarize(&MetricValues::f1);
  report.prauc = summarize(&MetricValues::prauc);
  report.ddi_rate = summarize(&MetricValues::ddi_rate);
  report.avg_meds = summarize(&MetricValues::avg_meds);
  return report;
}

WelchResult welch_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument(fmt::format("welch_test needs >= 2 values per group, got {} and {}", a.size(), b.size()));
  }
  auto moments = [](std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;

  WelchResult r;
  if (sa + sb == 0.0) {
    r.degenerate = true;
    r.df = na + nb - 2.0;
    if (ma == mb) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = ma > mb ? HUGE_VAL : -HUGE_VAL;
      r.p_value = 0.0;
    }
    return r;
  }
  r.statistic = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic))), 0.0, 1.0);
  return r;
}

}  // namespace gdm::objective
