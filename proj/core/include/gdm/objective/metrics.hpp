#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gdm/ehr/records.hpp"

namespace gdm::objective {

using MedSet = std::vector<std::size_t>;

/// |A n B| / |A u B|; both empty gives 1. Inputs need not be sorted.
double jaccard(std::span<const std::size_t> pred, std::span<const std::size_t> truth);
/// Set F1; both empty gives 1, P + R = 0 gives 0.
double f1_set(std::span<const std::size_t> pred, std::span<const std::size_t> truth);
/// Average precision of one visit; nullopt when y has no positives.
/// Ties in p are ranked by ascending index.
std::optional<double> prauc_sample(std::span<const double> p, std::span<const double> y);
/// Pooled interacting pairs over pooled pairs; 0 when there are no pairs.
double ddi_rate(const std::vector<MedSet>& sets, const ehr::DdiGraph& ddi);
double avg_meds(const std::vector<MedSet>& sets);

struct VisitPrediction {
  std::vector<double> probabilities;
  MedSet predicted;
  MedSet truth;
};

struct PatientPredictions {
  std::string patient_id;
  std::vector<VisitPrediction> visits;
};

struct MetricValues {
  double jaccard = 0.0;
  double f1 = 0.0;
  double prauc = 0.0;
  double ddi_rate = 0.0;
  double avg_meds = 0.0;
};

inline constexpr std::string_view kMetricNames[] = {"jaccard", "f1", "prauc", "ddi_rate", "avg_meds"};
double metric_value(const MetricValues& m, std::string_view name);

/// Set metrics are averaged over visits; the DDI rate is pooled.
MetricValues compute_metrics(std::span<const PatientPredictions> patients, const ehr::DdiGraph& ddi);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct BootstrapReport {
  /// Patient indices drawn in each iteration.
  std::vector<std::vector<std::size_t>> subsamples;
  std::vector<MetricValues> per_iteration;
  MeanStd jaccard, f1, prauc, ddi_rate, avg_meds;

  const MeanStd& summary(std::string_view metric) const;
};

/// Population mean and standard deviation (divisor n).
MeanStd mean_std(std::span<const double> values);

/// Each iteration draws floor(fraction * n) patients without replacement.
BootstrapReport bootstrap_eval(std::span<const PatientPredictions> patients, const ehr::DdiGraph& ddi,
                               std::uint64_t seed, std::size_t iterations = 10, double fraction = 0.8);

struct WelchResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  /// Both groups have zero variance.
  bool degenerate = false;
};

/// Two-sided Welch t-test. Needs at least two values per group.
WelchResult welch_test(std::span<const double> a, std::span<const double> b);

}  // namespace gdm::objective
