#include "gdm/autodiff/ops.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace gdm::ad {

namespace {

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw TensorError(fmt::format("{}: expected rank-2 tensor, got {}", op, shape_str(a.shape())));
}

/// Parent gradient buffer, or nullptr when that parent is constant.
std::vector<double>* pgrad(Node& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

const std::vector<double>& pval(Node& self, std::size_t i) { return self.parents[i]->value; }

enum class Bcast { kNone, kA, kB };

Bcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::kNone;
  if (a.rank() == b.rank() && a.rank() >= 2) {
    const bool tail_eq = std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1);
    if (tail_eq && a.shape()[0] == 1) return Bcast::kA;
    if (tail_eq && b.shape()[0] == 1) return Bcast::kB;
  }
  throw TensorError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()), shape_str(b.shape())));
}

template <typename F, typename DA, typename DB>
Tensor elementwise(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const Bcast mode = broadcast_mode(a, b, op);
  const Shape out_shape = mode == Bcast::kA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const std::size_t row = mode == Bcast::kNone ? n : (mode == Bcast::kA ? a.numel() : b.numel());
  auto ia = [mode, row](std::size_t i) { return mode == Bcast::kA ? i % row : i; };
  auto ib = [mode, row](std::size_t i) { return mode == Bcast::kB ? i % row : i; };
  std::vector<double> out(n);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ia(i)], bv[ib(i)]);
  return make_result(op, out_shape, std::move(out), {a, b}, [=](Node& self) {
    const auto& x = pval(self, 0);
    const auto& y = pval(self, 1);
    auto* gx = pgrad(self, 0);
    auto* gy = pgrad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i];
      if (gx) (*gx)[ia(i)] += g * da(x[ia(i)], y[ib(i)]);
      if (gy) (*gy)[ib(i)] += g * db(x[ia(i)], y[ib(i)]);
    }
  });
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw TensorError(fmt::format("matmul: inner dimensions differ, {} x {}", shape_str(a.shape()), shape_str(b.shape())));
  }
  std::vector<double> out(m * n, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& av = pval(self, 0);
    const auto& bv = pval(self, 1);
    const auto& g = self.grad;
    if (auto* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
          (*ga)[i * k + p] += s;
        }
      }
    }
    if (auto* gb = pgrad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result("scale", a.shape(), std::move(out), {a}, [s](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += s * self.grad[i];
  });
}

Tensor add_constant(const Tensor& a, std::span<const double> c) {
  if (c.size() != a.numel()) {
    throw TensorError(fmt::format("add_constant: {} values for shape {}", c.size(), shape_str(a.shape())));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return make_result("add_constant", a.shape(), std::move(out), {a}, [](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
  });
}

Tensor expand(const Tensor& a, const Shape& shape) {
  require_rank2(a, "expand");
  if (shape.size() != 2) throw TensorError("expand: target must be rank 2, got " + shape_str(shape));
  const std::size_t r = a.rows(), c = a.cols();
  if ((r != 1 && r != shape[0]) || (c != 1 && c != shape[1])) {
    throw TensorError(fmt::format("expand: cannot expand {} to {}", shape_str(a.shape()), shape_str(shape)));
  }
  const std::size_t R = shape[0], C = shape[1];
  auto src = [r, c](std::size_t i, std::size_t j) { return (r == 1 ? 0 : i) * c + (c == 1 ? 0 : j); };
  std::vector<double> out(R * C);
  const auto av = a.data();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] = av[src(i, j)];
  return make_result("expand", shape, std::move(out), {a}, [R, C, src](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) (*ga)[src(i, j)] += self.grad[i * C + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw TensorError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != r) {
      throw TensorError(fmt::format("concat_cols: row mismatch {} vs {}", shape_str(parts[0].shape()), shape_str(p.shape())));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = v[i * widths[k] + j];
    off += widths[k];
  }
  return make_result("concat_cols", {r, total}, std::move(out), {parts.begin(), parts.end()},
                     [r, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (auto* g = pgrad(self, k)) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               (*g)[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw TensorError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != c) {
      throw TensorError(fmt::format("concat_rows: column mismatch {} vs {}", shape_str(parts[0].shape()), shape_str(p.shape())));
    }
    sizes.push_back(p.numel());
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result("concat_rows", {rows, c}, std::move(out), {parts.begin(), parts.end()}, [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (auto* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < sizes[k]; ++i) (*g)[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  const std::size_t r = a.rows(), c = a.cols();
  if (begin >= end || end > c) {
    throw TensorError(fmt::format("slice_cols: range [{}, {}) invalid for {}", begin, end, shape_str(a.shape())));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(r * w);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  return make_result("slice_cols", {r, w}, std::move(out), {a}, [r, c, w, begin](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) (*ga)[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor repeat_interleave_cols(const Tensor& a, std::size_t n_heads, std::size_t repeats) {
  require_rank2(a, "repeat_interleave_cols");
  const std::size_t r = a.rows(), c = a.cols();
  if (n_heads == 0 || repeats == 0 || c % n_heads != 0) {
    throw TensorError(fmt::format("repeat_interleave_cols: {} columns not divisible into {} heads", c, n_heads));
  }
  const std::size_t hd = c / n_heads;
  const std::size_t oc = c * repeats;
  // output column -> source column
  std::vector<std::size_t> src(oc);
  for (std::size_t h = 0; h < n_heads; ++h)
    for (std::size_t k = 0; k < repeats; ++k)
      for (std::size_t j = 0; j < hd; ++j) src[(h * repeats + k) * hd + j] = h * hd + j;
  std::vector<double> out(r * oc);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < oc; ++j) out[i * oc + j] = av[i * c + src[j]];
  return make_result("repeat_interleave_cols", {r, oc}, std::move(out), {a}, [r, c, oc, src](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < oc; ++j) (*ga)[i * c + src[j]] += self.grad[i * oc + j];
  });
}

Tensor sum(const Tensor& a) {
  const auto v = a.data();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return make_result("sum", {1}, {s}, {a}, [](Node& self) {
    auto* ga = pgrad(self, 0);
    for (auto& g : *ga) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const auto v = a.data();
  const double n = static_cast<double>(v.size());
  const double s = std::accumulate(v.begin(), v.end(), 0.0) / n;
  return make_result("mean", {1}, {s}, {a}, [n](Node& self) {
    auto* ga = pgrad(self, 0);
    for (auto& g : *ga) g += self.grad[0] / n;
  });
}

Tensor sum_rows(const Tensor& a) {
  require_rank2(a, "sum_rows");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(c, 0.0);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
  return make_result("sum_rows", {1, c}, std::move(out), {a}, [r, c](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += self.grad[j];
  });
}

Tensor mean_rows(const Tensor& a) {
  require_rank2(a, "mean_rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Tensor square_sum(const Tensor& a) {
  const auto v = a.data();
  double s = 0.0;
  for (double x : v) s += x * x;
  return make_result("square_sum", {1}, {s}, {a}, [](Node& self) {
    auto* ga = pgrad(self, 0);
    const auto& x = pval(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += 2.0 * x[i] * self.grad[0];
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  return make_result("sigmoid", a.shape(), std::move(out), {a}, [](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      (*ga)[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return make_result("tanh", a.shape(), std::move(out), {a}, [](Node& self) {
    auto* ga = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      (*ga)[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return make_result("relu", a.shape(), std::move(out), {a}, [](Node& self) {
    auto* ga = pgrad(self, 0);
    const auto& x = pval(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x[i] > 0.0) (*ga)[i] += self.grad[i];
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank2(a, "softmax_rows");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = av[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, av[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(av[i * c + j] - mx);
      z += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return make_result("softmax_rows", {r, c}, std::move(out), {a}, [r, c](Node& self) {
    auto* ga = pgrad(self, 0);
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank2(table, "gather_rows");
  if (indices.empty()) throw TensorError("gather_rows: empty index list");
  const std::size_t n = table.rows(), c = table.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out;
  out.reserve(idx.size() * c);
  const auto tv = table.data();
  for (auto i : idx) {
    if (i >= n) throw TensorError(fmt::format("gather_rows: index {} out of range for {} rows", i, n));
    out.insert(out.end(), tv.begin() + static_cast<std::ptrdiff_t>(i * c),
               tv.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
  }
  const std::size_t k = idx.size();
  return make_result("gather_rows", {k, c}, std::move(out), {table}, [idx, c](Node& self) {
    auto* gt = pgrad(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) (*gt)[idx[r] * c + j] += self.grad[r * c + j];
  });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets) {
  if (targets.size() != logits.numel()) {
    throw TensorError(fmt::format("bce_with_logits: {} targets for shape {}", targets.size(), shape_str(logits.shape())));
  }
  const auto z = logits.data();
  const double n = static_cast<double>(z.size());
  std::vector<double> y(targets.begin(), targets.end());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    s += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return make_result("bce_with_logits", {1}, {s / n}, {logits}, [y, n](Node& self) {
    auto* gz = pgrad(self, 0);
    const auto& z = pval(self, 0);
    for (std::size_t i = 0; i < z.size(); ++i) (*gz)[i] += self.grad[0] * (stable_sigmoid(z[i]) - y[i]) / n;
  });
}

}  // namespace gdm::ad
