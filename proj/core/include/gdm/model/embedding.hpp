#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gdm/autodiff/tensor.hpp"
#include "gdm/ehr/records.hpp"

namespace gdm::model {

using ad::Tensor;

/// Sum of table rows for `codes`; empty set gives a 1 x d zero row.
Tensor embed_codes_pooled(std::span<const std::size_t> codes, const Tensor& table);

/// Mean over events of ReLU([id_norm, value_norm] * W_lab); no events -> zero.
/// `lab_projection` is 2 x d.
Tensor encode_labs(std::span<const ehr::NormalizedLab> labs, const Tensor& lab_projection);

struct DemographicVectors {
  Tensor gender;  // row of the 2 x d gender table
  Tensor age;     // (age / 100) * age projection row
};

DemographicVectors encode_demographics(int gender, double age, const Tensor& gender_table,
                                       const Tensor& age_projection);

/// Undirected same-modality neighbourhood over a vocabulary.
class HomoGraph {
 public:
  HomoGraph() = default;
  /// `adjacency` is n x n row-major; non-zero marks an edge. Diagonal ignored.
  HomoGraph(std::size_t n, std::span<const double> adjacency);

  static HomoGraph from_ddi(const ehr::DdiGraph& ddi);
  /// Codes a and b are neighbours when some medication has a positive effect
  /// from both.
  static HomoGraph from_cosupport(const ehr::EffectMatrix& effects);

  std::size_t size() const { return neighbors_.size(); }
  const std::vector<std::size_t>& neighbors(std::size_t code) const { return neighbors_.at(code); }

  /// Mixing weights w such that w * table is the mean over `codes` of the mean
  /// neighbour row (zero contribution for isolated codes).
  std::vector<double> message_weights(std::span<const std::size_t> codes) const;

 private:
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// pooled + ReLU(message * refine_map). With an empty neighbourhood or a zero
/// map the pooled input is returned unchanged.
Tensor homograph_refine(const Tensor& pooled, std::span<const std::size_t> codes, const HomoGraph& graph,
                        const Tensor& table, const Tensor& refine_map);

}  // namespace gdm::model
