#include "gdm/model/graph_prior.hpp"

#include <fmt/format.h>

namespace gdm::model {

namespace {

void check_vocab(std::span<const std::size_t> meds, const ehr::DdiGraph& ddi) {
  for (auto m : meds) {
    if (m >= ddi.size()) {
      throw ehr::DataError(fmt::format("medication index {} outside DDI graph of size {}", m, ddi.size()));
    }
  }
}

}  // namespace

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kDiag: return "diag";
    case Channel::kProc: return "proc";
    case Channel::kMed: return "med";
    case Channel::kLab: return "lab";
    case Channel::kNull: return "null";
  }
  return "?";
}

double visit_pair_ddi_density(std::span<const std::size_t> meds_q, std::span<const std::size_t> meds_k,
                              const ehr::DdiGraph& ddi) {
  check_vocab(meds_q, ddi);
  check_vocab(meds_k, ddi);
  if (meds_q.empty() || meds_k.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto a : meds_q)
    for (auto b : meds_k) hits += ddi.edge(a, b) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(meds_q.size() * meds_k.size());
}

std::pair<std::size_t, std::size_t> ddi_pair_count(std::span<const std::size_t> meds, const ehr::DdiGraph& ddi) {
  check_vocab(meds, ddi);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < meds.size(); ++i)
    for (std::size_t j = i + 1; j < meds.size(); ++j) hits += ddi.edge(meds[i], meds[j]) ? 1 : 0;
  const std::size_t n = meds.size();
  return {hits, n < 2 ? 0 : n * (n - 1) / 2};
}

InterVisitBias assemble_inter_bias(std::span<const std::size_t> current_meds,
                                   const std::vector<std::vector<std::size_t>>& historical_meds,
                                   std::span<const KvSlot> layout, const ehr::DdiGraph& ddi) {
  InterVisitBias out;
  out.rows = 1;
  out.cols = layout.size();
  out.matrix.assign(out.cols, 0.0);
  out.med_mask_q = {true};
  out.med_mask_kv.assign(out.cols, false);

  std::vector<double> density(historical_meds.size(), -1.0);
  for (std::size_t j = 0; j < layout.size(); ++j) {
    const auto& slot = layout[j];
    if (slot.channel == Channel::kNull) continue;
    if (slot.visit >= historical_meds.size()) {
      throw ehr::DataError(fmt::format("kv position {} refers to visit {} but only {} historical visits given", j,
                                       slot.visit, historical_meds.size()));
    }
    if (slot.channel != Channel::kMed) continue;
    out.med_mask_kv[j] = true;
    auto& d = density[slot.visit];
    if (d < 0.0) d = visit_pair_ddi_density(current_meds, historical_meds[slot.visit], ddi);
    out.matrix[j] = d;
  }
  return out;
}

}  // namespace gdm::model
