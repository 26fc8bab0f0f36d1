#include "gdm/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gdm/autodiff/adam.hpp"
#include "gdm/autodiff/ops.hpp"

namespace gdm::harness {

namespace {

std::vector<double> targets(const ehr::EncodedVisit& v, std::size_t n_med) {
  std::vector<double> y(n_med, 0.0);
  for (auto m : v.medications) y.at(m) = 1.0;
  return y;
}

std::vector<std::vector<double>> snapshot(const model::NamedParams& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore(model::NamedParams& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace

PatientLoss patient_loss(const model::Model& model, const ehr::EncodedPatient& patient, const ad::Tensor& ddi_adjacency,
                         const objective::LossConfig& loss, double beta, double threshold,
                         const model::ForwardOptions& options) {
  const auto params = model.named_params();
  const auto out = model::forward_patient(model, patient, options);
  const std::size_t n_med = model.config().n_med;

  PatientLoss r;
  ad::Tensor total;
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto bce = ad::bce_with_logits(out[t].logits, targets(patient.visits[t], n_med));
    r.bce += bce.item();
    auto pred = objective::predicted_set(out[t].probabilities, threshold);
    ad::Tensor term = bce;
    if (beta > 0.0) {
      auto ddi = objective::ddi_loss_tensor(ad::sigmoid(out[t].logits), pred, ddi_adjacency, loss.ddi_coeff);
      r.ddi += ddi.item();
      term = ad::add(term, ad::scale(ddi, beta));
    }
    total = total.defined() ? ad::add(total, term) : term;
    r.predicted.push_back(std::move(pred));
  }
  if (loss.alpha > 0.0) {
    auto reg = objective::l2_tensor(params);
    r.reg = reg.item();
    total = ad::add(total, ad::scale(reg, loss.alpha));
  }
  r.total = total;
  return r;
}

std::vector<objective::PatientPredictions> predict_patients(const model::Model& model,
                                                            std::span<const ehr::EncodedPatient> patients,
                                                            double threshold) {
  std::vector<objective::PatientPredictions> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    objective::PatientPredictions pp{p.patient_id, {}};
    auto visits = model::forward_patient(model, p);
    for (std::size_t t = 0; t < visits.size(); ++t) {
      objective::VisitPrediction v;
      v.predicted = objective::predicted_set(visits[t].probabilities, threshold);
      v.probabilities = std::move(visits[t].probabilities);
      v.truth = p.visits[t].medications;
      pp.visits.push_back(std::move(v));
    }
    out.push_back(std::move(pp));
  }
  return out;
}

double mean_bce(const model::Model& model, std::span<const ehr::EncodedPatient> patients) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& p : patients) {
    auto visits = model::forward_patient(model, p);
    for (std::size_t t = 0; t < visits.size(); ++t) {
      s += objective::bce_loss_logits(targets(p.visits[t], model.config().n_med), visits[t].logits.data());
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

model::Model make_model(const Dataset& data, const RunConfig& config) {
  config.validate();
  return model::Model(config.model_config(data.vocab), model::ModelKnowledge::build(data.ddi, data.causal),
                      config.seed);
}

TrainResult train_model(model::Model& model, const Dataset& data, const RunConfig& config,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) throw TrainingError("no training patients");
  auto params = model.named_params();
  std::vector<ad::Tensor> leaves;
  for (auto& [name, t] : params) leaves.push_back(t);

  const auto adjacency = objective::ddi_matrix(data.ddi);
  objective::LossConfig step_loss = config.loss;
  if (config.reg_scope == RegScope::kDataset) step_loss.alpha /= static_cast<double>(data.train.size());
  ad::AdamState adam;
  adam.learning_rate = config.learning_rate;
  const Rng root(config.seed);

  TrainResult result;
  try {
    result.initial_train_bce = mean_bce(model, data.train);
  } catch (const std::exception& e) {
    throw TrainingError(fmt::format("epoch 0 (initial evaluation): {}", e.what()));
  }
  auto best = snapshot(params);
  result.best_val_jaccard = -1.0;

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = root.split("shuffle").split(epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    Rng dropout = root.split("dropout").split(epoch);

    objective::EmaTracker ema(0.9);
    EpochLog log;
    log.epoch = epoch;
    std::size_t n_visits = 0;
    for (auto idx : order) {
      const auto& patient = data.train[idx];
      const double beta = ema.has_value() ? objective::beta_anneal(ema.value(), step_loss) : 0.0;
      try {
        model::ForwardOptions opts;
        opts.training = true;
        opts.dropout_rng = &dropout;
        auto pl = patient_loss(model, patient, adjacency, step_loss, beta, config.threshold, opts);
        const double value = pl.total.item();
        if (!std::isfinite(value)) throw ad::TensorError("non-finite loss");
        ad::backward(pl.total);
        ad::adam_step(leaves, adam);
        result.step_losses.push_back(value);
        log.train_loss += value;
        log.train_bce += pl.bce;
        n_visits += patient.visits.size();
        ema.update(objective::ddi_rate(pl.predicted, data.ddi));
        log.beta = beta;
      } catch (const std::exception& e) {
        throw TrainingError(fmt::format("epoch {} patient '{}': {}", epoch, patient.patient_id, e.what()));
      }
    }
    log.train_loss /= static_cast<double>(order.size());
    log.train_bce /= static_cast<double>(std::max<std::size_t>(n_visits, 1));
    log.ddi_ema = ema.has_value() ? ema.value() : 0.0;

    if (!data.validation.empty()) {
      const auto preds = predict_patients(model, data.validation, config.threshold);
      const auto m = objective::compute_metrics(preds, data.ddi);
      log.val_jaccard = m.jaccard;
      log.val_ddi_rate = m.ddi_rate;
    }
    if (log.val_jaccard > result.best_val_jaccard) {
      result.best_val_jaccard = log.val_jaccard;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  restore(params, best);
  if (result.best_val_jaccard < 0.0) result.best_val_jaccard = 0.0;
  result.final_train_bce = mean_bce(model, data.train);
  return result;
}

FrequencyBaseline FrequencyBaseline::fit(std::span<const ehr::EncodedPatient> train, std::size_t n_med) {
  FrequencyBaseline b;
  b.frequency.assign(n_med, 0.0);
  std::size_t visits = 0, total = 0;
  for (const auto& p : train) {
    for (const auto& v : p.visits) {
      for (auto m : v.medications) b.frequency.at(m) += 1.0;
      total += v.medications.size();
      ++visits;
    }
  }
  if (visits == 0) throw std::invalid_argument("frequency baseline: no training visits");
  for (auto& f : b.frequency) f /= static_cast<double>(visits);
  const auto k = static_cast<std::size_t>(std::lround(static_cast<double>(total) / static_cast<double>(visits)));
  std::vector<std::size_t> order(n_med);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto c) { return b.frequency[a] > b.frequency[c]; });
  b.top_k.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, n_med)));
  std::sort(b.top_k.begin(), b.top_k.end());
  return b;
}

std::vector<objective::PatientPredictions> FrequencyBaseline::predict(
    std::span<const ehr::EncodedPatient> patients) const {
  std::vector<objective::PatientPredictions> out;
  for (const auto& p : patients) {
    objective::PatientPredictions pp{p.patient_id, {}};
    for (const auto& v : p.visits) pp.visits.push_back({frequency, top_k, v.medications});
    out.push_back(std::move(pp));
  }
  return out;
}

}  // namespace gdm::harness
