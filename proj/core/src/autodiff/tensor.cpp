#include "gdm/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace gdm::ad {

namespace {

std::atomic<std::uint64_t> g_seq{0};

std::shared_ptr<Node> new_leaf(Shape shape, std::vector<double> value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->leaf = true;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  n->op = "leaf";
  return n;
}

void check_finite(const std::vector<double>& v, std::string_view op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw TensorError(fmt::format("{}: non-finite value", op));
  }
}

}  // namespace

std::string shape_str(const Shape& s) { return fmt::format("[{}]", fmt::join(s, ", ")); }

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw TensorError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  const auto n = shape_numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw TensorError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw TensorError(fmt::format("data length {} does not match shape {}", data.size(), shape_str(shape)));
  }
  check_finite(data, "Tensor::from");
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from({1, n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw TensorError("rows(): expected rank-2 tensor, got " + shape_str(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw TensorError("cols(): expected rank-2 tensor, got " + shape_str(shape()));
  return node_->shape[1];
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item(): tensor has " + std::to_string(numel()) + " elements");
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() { node_->grad.clear(); }
const std::string& Tensor::op_name() const { return node_->op; }

Tensor make_result(std::string op, Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
  check_finite(value, op);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->leaf = false;
  n->op = std::move(op);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

namespace {

void collect(Node* root, std::vector<Node*>& out) {
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root};
  seen.insert(root);
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    out.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined()) throw TensorError("backward: undefined tensor");
  if (loss.numel() != 1) throw TensorError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  Node* root = loss.node();
  if (root->backward_done) throw TensorError("backward: graph already swept; rebuild the forward pass");
  if (!root->requires_grad) throw TensorError("backward: loss does not depend on any requires_grad tensor");

  std::vector<Node*> order;
  collect(root, order);
  // Parents are always created before children, so descending creation order
  // is a valid reverse topological order.
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });

  root->ensure_grad()[0] += 1.0;
  for (Node* n : order) {
    if (n->leaf || !n->backward_fn || n->grad.empty()) continue;
    n->backward_fn(*n);
  }
  // Interior gradients are scratch; leaves keep theirs.
  for (Node* n : order) {
    if (!n->leaf) n->grad.clear();
  }
  root->backward_done = true;
}

std::size_t graph_size(const Tensor& root) {
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node()};
  seen.insert(root.node());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  return seen.size();
}

}  // namespace gdm::ad
