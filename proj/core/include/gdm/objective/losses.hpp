#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gdm/autodiff/tensor.hpp"
#include "gdm/ehr/records.hpp"
#include "gdm/model/params.hpp"

namespace gdm::objective {

using ad::Tensor;

struct LossConfig {
  double beta0 = 1.0;
  double gamma = 2.5;
  double ddi_target = 0.06;
  double alpha = 0.005;
  double ddi_coeff = 0.0005;
  bool clamp_beta_nonnegative = true;

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Mean binary cross-entropy over the vocabulary from probabilities.
/// Probabilities are clipped to [1e-15, 1 - 1e-15].
double bce_loss(std::span<const double> y, std::span<const double> p);
/// Same loss from logits, stable for extreme values.
double bce_loss_logits(std::span<const double> y, std::span<const double> z);

/// {m : p_m >= threshold}, ascending.
std::vector<std::size_t> predicted_set(std::span<const double> p, double threshold = 0.5);

/// coeff / |M|^2 * sum over ordered pairs (i, j) in M of p_i p_j A_ij.
double ddi_loss(std::span<const double> p, std::span<const std::size_t> m_pred, const ehr::DdiGraph& ddi,
                double coeff = 0.0005);

double beta_anneal(double ddi_current, const LossConfig& cfg);

struct LossBreakdown {
  double bce = 0.0;
  double beta = 0.0;
  double ddi = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

/// bce + beta * ddi + alpha * ||theta||^2.
LossBreakdown total_loss(std::span<const double> y, std::span<const double> p, std::span<const std::size_t> m_pred,
                         const ehr::DdiGraph& ddi, const model::NamedParams& theta, const LossConfig& cfg,
                         double ddi_current);

/// Dense n x n constant adjacency for the differentiable DDI term.
Tensor ddi_matrix(const ehr::DdiGraph& ddi);

/// Differentiable DDI term on a 1 x n probability row; shape {1}.
Tensor ddi_loss_tensor(const Tensor& probs, std::span<const std::size_t> m_pred, const Tensor& adjacency,
                       double coeff);

/// Differentiable sum of squares over all parameters; shape {1}.
Tensor l2_tensor(const model::NamedParams& theta);

/// Running exponential average; unset until the first update.
class EmaTracker {
 public:
  explicit EmaTracker(double decay = 0.9) : decay_(decay) {}
  void update(double x);
  void reset() { has_value_ = false; }
  bool has_value() const { return has_value_; }
  double value() const { return value_; }

 private:
  double decay_;
  double value_ = 0.0;
  bool has_value_ = false;
};

}  // namespace gdm::objective
