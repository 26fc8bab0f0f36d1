#pragma once

#include <string>
#include <vector>

#include "gdm/autodiff/grad_check.hpp"
#include "gdm/autodiff/rng.hpp"
#include "gdm/harness/trainer.hpp"
#include "gdm/model/temporal_model.hpp"
#include "gdm/objective/losses.hpp"

namespace gdm::testing {

/// Biases start at exactly zero, which parks the first medication GRU state
/// on a relu kink (zero history in, zero state out). Finite differences are
/// meaningless there, so gradient checks move each bias to a small random
/// value first.
inline void offset_biases(model::Model& m, std::uint64_t seed, double bound = 0.1) {
  Rng rng = Rng(seed).split("bias-offset");
  for (auto& [name, t] : m.named_params()) {
    const auto leaf = name.substr(name.rfind('.') + 1);
    if (leaf.empty() || leaf[0] != 'b') continue;
    for (auto& x : t.mutable_data()) x = rng.uniform(-bound, bound);
  }
}

struct ModelGradResult {
  ad::GradCheckResult check;
  std::string worst_param;
  std::size_t n_coords = 0;
};

/// Central differences over every parameter of the full training objective
/// (BCE, DDI term at `beta`, L2) for one patient, dropout off.
///
/// Steps much below 1e-4 lose coordinates whose true derivative is under
/// ~1e-9 to cancellation in f(x+h) - f(x-h); the L2 term keeps every
/// coordinate's derivative well above that floor.
inline ModelGradResult model_grad_check(model::Model& m, const ehr::EncodedPatient& patient, const ehr::DdiGraph& ddi,
                                        double beta = 1.0, double h = 1e-4) {
  const auto adjacency = objective::ddi_matrix(ddi);
  objective::LossConfig loss;
  auto named = m.named_params();
  std::vector<ad::Tensor> params;
  for (auto& [n, t] : named) params.push_back(t);
  // The predicted sets in the DDI term are piecewise constant; hold them at
  // the unperturbed point.
  const auto base = harness::patient_loss(m, patient, adjacency, loss, beta, 0.5);
  auto f = [&] {
    const auto out = model::forward_patient(m, patient);
    ad::Tensor total = ad::scale(objective::l2_tensor(named), loss.alpha);
    for (std::size_t t = 0; t < out.size(); ++t) {
      std::vector<double> y(out[t].logits.numel(), 0.0);
      for (auto med : patient.visits[t].medications) y[med] = 1.0;
      total = ad::add(total, ad::bce_with_logits(out[t].logits, y));
      auto ddi_t = objective::ddi_loss_tensor(ad::sigmoid(out[t].logits), base.predicted[t], adjacency,
                                              loss.ddi_coeff);
      total = ad::add(total, ad::scale(ddi_t, beta));
    }
    return total;
  };
  ModelGradResult r;
  r.check = ad::grad_check(f, params, h);
  std::size_t offset = 0;
  for (const auto& [name, t] : named) {
    if (r.worst_param.empty() && r.check.worst_index < offset + t.numel()) r.worst_param = name;
    offset += t.numel();
  }
  r.n_coords = offset;
  return r;
}

}  // namespace gdm::testing
