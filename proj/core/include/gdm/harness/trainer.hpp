#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdm/ehr/records.hpp"
#include "gdm/harness/dataset.hpp"
#include "gdm/harness/run_config.hpp"
#include "gdm/model/temporal_model.hpp"
#include "gdm/objective/metrics.hpp"

namespace gdm::harness {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training objective of one patient, summed over its visits.
struct PatientLoss {
  ad::Tensor total;
  double bce = 0.0;
  double ddi = 0.0;
  double reg = 0.0;
  /// Predicted set of each visit at the given threshold.
  std::vector<objective::MedSet> predicted;
};

/// sum_t [BCE_t + beta * DDI_t] + alpha * ||theta||^2. The predicted sets
/// entering the DDI term are read off the forward pass and held constant.
PatientLoss patient_loss(const model::Model& model, const ehr::EncodedPatient& patient, const ad::Tensor& ddi_adjacency,
                         const objective::LossConfig& loss, double beta, double threshold,
                         const model::ForwardOptions& options = {});

std::vector<objective::PatientPredictions> predict_patients(const model::Model& model,
                                                            std::span<const ehr::EncodedPatient> patients,
                                                            double threshold = 0.5);

/// Mean per-visit BCE in evaluation mode.
double mean_bce(const model::Model& model, std::span<const ehr::EncodedPatient> patients);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean objective per patient, dropout on
  double train_bce = 0.0;   // mean per-visit BCE, dropout on
  double ddi_ema = 0.0;
  double beta = 0.0;        // final annealing weight of the epoch
  double val_jaccard = 0.0;
  double val_ddi_rate = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  /// 0 means the initialization was kept.
  std::size_t best_epoch = 0;
  double best_val_jaccard = 0.0;
  double initial_train_bce = 0.0;
  double final_train_bce = 0.0;
  /// Objective of every optimizer step, in order.
  std::vector<double> step_losses;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam, one step per training patient, patients shuffled per epoch. The
/// model ends in the state of the epoch with the best validation Jaccard
/// (earliest on ties).
TrainResult train_model(model::Model& model, const Dataset& data, const RunConfig& config,
                        const EpochCallback& on_epoch = {});

model::Model make_model(const Dataset& data, const RunConfig& config);

/// Predict the k most frequent training medications at every visit, k being
/// the rounded mean training set size.
struct FrequencyBaseline {
  std::vector<double> frequency;
  objective::MedSet top_k;

  static FrequencyBaseline fit(std::span<const ehr::EncodedPatient> train, std::size_t n_med);
  std::vector<objective::PatientPredictions> predict(std::span<const ehr::EncodedPatient> patients) const;
};

}  // namespace gdm::harness
