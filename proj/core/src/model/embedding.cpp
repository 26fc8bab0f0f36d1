#include "gdm/model/embedding.hpp"

#include <fmt/format.h>

#include "gdm/autodiff/ops.hpp"

namespace gdm::model {

using ad::TensorError;

Tensor embed_codes_pooled(std::span<const std::size_t> codes, const Tensor& table) {
  if (codes.empty()) return Tensor::zeros({1, table.cols()});
  for (auto c : codes) {
    if (c >= table.rows()) {
      throw TensorError(fmt::format("embed_codes_pooled: code index {} outside vocabulary of {}", c, table.rows()));
    }
  }
  return ad::sum_rows(ad::gather_rows(table, codes));
}

Tensor encode_labs(std::span<const ehr::NormalizedLab> labs, const Tensor& lab_projection) {
  if (lab_projection.rows() != 2) {
    throw TensorError("encode_labs: projection must be 2 x d, got " + ad::shape_str(lab_projection.shape()));
  }
  if (labs.empty()) return Tensor::zeros({1, lab_projection.cols()});
  std::vector<double> x;
  x.reserve(labs.size() * 2);
  for (const auto& e : labs) {
    x.push_back(e.id);
    x.push_back(e.value);
  }
  auto events = Tensor::from({labs.size(), 2}, std::move(x));
  return ad::mean_rows(ad::relu(ad::matmul(events, lab_projection)));
}

DemographicVectors encode_demographics(int gender, double age, const Tensor& gender_table,
                                       const Tensor& age_projection) {
  if (gender != 0 && gender != 1) throw TensorError(fmt::format("encode_demographics: gender {} not in {{0, 1}}", gender));
  if (!(age >= 0.0)) throw TensorError(fmt::format("encode_demographics: negative age {}", age));
  const std::size_t g = static_cast<std::size_t>(gender);
  return {ad::gather_rows(gender_table, std::span<const std::size_t>(&g, 1)), ad::scale(age_projection, age / 100.0)};
}

HomoGraph::HomoGraph(std::size_t n, std::span<const double> adjacency) : neighbors_(n) {
  if (adjacency.size() != n * n) {
    throw TensorError(fmt::format("HomoGraph: adjacency has {} entries, expected {} x {}", adjacency.size(), n, n));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (adjacency[i * n + j] != 0.0 || adjacency[j * n + i] != 0.0)) neighbors_[i].push_back(j);
}

HomoGraph HomoGraph::from_ddi(const ehr::DdiGraph& ddi) {
  const std::size_t n = ddi.size();
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = ddi(i, j);
  return HomoGraph(n, a);
}

HomoGraph HomoGraph::from_cosupport(const ehr::EffectMatrix& effects) {
  const std::size_t n = effects.rows;
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t m = 0; m < effects.cols; ++m) {
        if (effects(i, m) > 0.0 && effects(j, m) > 0.0) {
          a[i * n + j] = a[j * n + i] = 1.0;
          break;
        }
      }
    }
  }
  return HomoGraph(n, a);
}

std::vector<double> HomoGraph::message_weights(std::span<const std::size_t> codes) const {
  std::vector<double> w(size(), 0.0);
  if (codes.empty()) return w;
  const double outer = 1.0 / static_cast<double>(codes.size());
  for (auto c : codes) {
    const auto& nb = neighbors_.at(c);
    if (nb.empty()) continue;
    const double inner = outer / static_cast<double>(nb.size());
    for (auto n : nb) w[n] += inner;
  }
  return w;
}

Tensor homograph_refine(const Tensor& pooled, std::span<const std::size_t> codes, const HomoGraph& graph,
                        const Tensor& table, const Tensor& refine_map) {
  if (graph.size() != table.rows()) {
    throw TensorError(fmt::format("homograph_refine: graph over {} codes but table has {} rows", graph.size(),
                                  table.rows()));
  }
  auto w = graph.message_weights(codes);
  bool any = false;
  for (double x : w) any = any || x != 0.0;
  if (!any) return pooled;
  auto message = ad::matmul(Tensor::row(std::move(w)), table);
  return ad::add(pooled, ad::relu(ad::matmul(message, refine_map)));
}

}  // namespace gdm::model
