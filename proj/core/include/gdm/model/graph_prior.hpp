#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "gdm/ehr/records.hpp"

namespace gdm::model {

enum class Channel { kDiag, kProc, kMed, kLab, kNull };

std::string_view channel_name(Channel c);

/// Position `i` of the historical context holds `channel` of visit `visit`.
struct KvSlot {
  std::size_t visit = 0;
  Channel channel = Channel::kNull;
};

/// Mean of A over the |q| x |k| cross pairs; 0 if either set is empty.
double visit_pair_ddi_density(std::span<const std::size_t> meds_q, std::span<const std::size_t> meds_k,
                              const ehr::DdiGraph& ddi);

/// (interacting, total) over unordered pairs i < j of `meds`.
std::pair<std::size_t, std::size_t> ddi_pair_count(std::span<const std::size_t> meds, const ehr::DdiGraph& ddi);

struct InterVisitBias {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> matrix;  // rows x cols
  std::vector<bool> med_mask_q;
  std::vector<bool> med_mask_kv;

  double operator()(std::size_t i, std::size_t j) const { return matrix[i * cols + j]; }
};

/// Single query row, always a medication channel. Each medication slot of
/// historical visit s gets density(current_meds, historical[s]).
InterVisitBias assemble_inter_bias(std::span<const std::size_t> current_meds,
                                   const std::vector<std::vector<std::size_t>>& historical_meds,
                                   std::span<const KvSlot> layout, const ehr::DdiGraph& ddi);

}  // namespace gdm::model
