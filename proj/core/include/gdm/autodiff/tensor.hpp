#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdm::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Raised for shape mismatches, non-finite values and misuse of the graph.
class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node;

/// Handle to a node of the reverse-mode graph.
///
/// Leaves are created with the static factories; every op in ops.hpp returns a
/// fresh interior node that remembers its parents and a closure that scatters
/// its output gradient into them. Handles are cheap to copy and share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  /// Rejects non-finite data and size mismatches.
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Rank-2 accessors; throw for other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Mutable view of the values. Only meaningful on leaves (parameters and
  /// finite-difference probes); mutating an interior node does not replay.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  const std::string& op_name() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  bool backward_done = false;
  std::uint64_t seq = 0;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

/// Creates an interior node. Checks output finiteness, and only records the
/// backward closure when some parent requires a gradient.
Tensor make_result(std::string op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward_fn);

/// Reverse sweep from a scalar loss.
///
/// Nodes reachable from `loss` are visited once each in reverse creation
/// order; leaf gradients accumulate across calls until zero_grad(). A graph
/// may be swept only once.
void backward(const Tensor& loss);

/// Number of nodes reachable from `root` (inclusive); diagnostic only.
std::size_t graph_size(const Tensor& root);

}  // namespace gdm::ad
