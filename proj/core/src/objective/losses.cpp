#include "gdm/objective/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gdm/autodiff/ops.hpp"

namespace gdm::objective {

void LossConfig::validate() const {
  if (!(ddi_target > 0.0)) throw std::invalid_argument(fmt::format("ddi_target must be > 0, got {}", ddi_target));
  if (!(gamma > 0.0)) throw std::invalid_argument(fmt::format("gamma must be > 0, got {}", gamma));
  if (!(alpha >= 0.0)) throw std::invalid_argument(fmt::format("alpha must be >= 0, got {}", alpha));
  if (!(beta0 >= 0.0)) throw std::invalid_argument(fmt::format("beta0 must be >= 0, got {}", beta0));
  if (!(ddi_coeff >= 0.0)) throw std::invalid_argument(fmt::format("ddi_coeff must be >= 0, got {}", ddi_coeff));
}

namespace {

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(fmt::format("{}: size mismatch {} vs {}", what, a, b));
  if (a == 0) throw std::invalid_argument(fmt::format("{}: empty input", what));
}

}  // namespace

double bce_loss(std::span<const double> y, std::span<const double> p) {
  check_sizes(y.size(), p.size(), "bce_loss");
  constexpr double kEps = 1e-15;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p[i], kEps, 1.0 - kEps);
    s += y[i] * std::log(q) + (1.0 - y[i]) * std::log1p(-q);
  }
  return -s / static_cast<double>(y.size());
}

double bce_loss_logits(std::span<const double> y, std::span<const double> z) {
  check_sizes(y.size(), z.size(), "bce_loss_logits");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    // max(z, 0) - z y + log(1 + exp(-|z|))
    s += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return s / static_cast<double>(y.size());
}

std::vector<std::size_t> predicted_set(std::span<const double> p, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] >= threshold) out.push_back(i);
  return out;
}

double ddi_loss(std::span<const double> p, std::span<const std::size_t> m_pred, const ehr::DdiGraph& ddi,
                double coeff) {
  if (p.size() != ddi.size()) {
    throw std::invalid_argument(fmt::format("ddi_loss: {} probabilities for a graph of {}", p.size(), ddi.size()));
  }
  if (m_pred.size() <= 1) return 0.0;
  double s = 0.0;
  for (auto i : m_pred)
    for (auto j : m_pred) s += p[i] * p[j] * ddi(i, j);
  const double n = static_cast<double>(m_pred.size());
  return coeff / (n * n) * s;
}

double beta_anneal(double ddi_current, const LossConfig& cfg) {
  const double raw = cfg.beta0 * (1.0 - std::exp(-cfg.gamma * (ddi_current - cfg.ddi_target) / cfg.ddi_target));
  return cfg.clamp_beta_nonnegative ? std::max(0.0, raw) : raw;
}

LossBreakdown total_loss(std::span<const double> y, std::span<const double> p, std::span<const std::size_t> m_pred,
                         const ehr::DdiGraph& ddi, const model::NamedParams& theta, const LossConfig& cfg,
                         double ddi_current) {
  LossBreakdown b;
  b.bce = bce_loss(y, p);
  b.beta = beta_anneal(ddi_current, cfg);
  b.ddi = ddi_loss(p, m_pred, ddi, cfg.ddi_coeff);
  b.reg = model::squared_norm(theta);
  b.total = b.bce + b.beta * b.ddi + cfg.alpha * b.reg;
  return b;
}

Tensor ddi_matrix(const ehr::DdiGraph& ddi) {
  const std::size_t n = ddi.size();
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = ddi(i, j);
  return Tensor::from({n, n}, std::move(a));
}

Tensor ddi_loss_tensor(const Tensor& probs, std::span<const std::size_t> m_pred, const Tensor& adjacency,
                       double coeff) {
  const std::size_t n = probs.cols();
  if (adjacency.shape() != ad::Shape{n, n}) {
    throw ad::TensorError(fmt::format("ddi_loss_tensor: adjacency {} for {} probabilities",
                                      ad::shape_str(adjacency.shape()), n));
  }
  if (m_pred.size() <= 1) return Tensor::zeros({1});
  std::vector<double> mask(n, 0.0);
  for (auto m : m_pred) mask.at(m) = 1.0;
  auto pm = ad::mul(probs, Tensor::row(std::move(mask)));
  auto quad = ad::matmul(ad::matmul(pm, adjacency), ad::transpose(pm));
  const double k = static_cast<double>(m_pred.size());
  return ad::sum(ad::scale(quad, coeff / (k * k)));
}

Tensor l2_tensor(const model::NamedParams& theta) {
  if (theta.empty()) return Tensor::zeros({1});
  Tensor acc = ad::square_sum(theta.front().second);
  for (std::size_t i = 1; i < theta.size(); ++i) acc = ad::add(acc, ad::square_sum(theta[i].second));
  return acc;
}

void EmaTracker::update(double x) {
  value_ = has_value_ ? decay_ * value_ + (1.0 - decay_) * x : x;
  has_value_ = true;
}

}  // namespace gdm::objective
