#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cadd::numeric {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode graph. Non-leaf nodes own their parents;
// `backward` reads `grad` of the node it is attached to and accumulates into
// the grads of `parents`.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

/// Handle to an fp64 row-major array that may participate in reverse-mode
/// differentiation. Copies share storage, the way framework tensors do; use
/// `clone()` for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  /// In-place access for parameter updates. Does not record anything on the graph.
  std::span<double> values_mut();
  double item() const;
  double at(std::size_t flat_index) const;

  bool requires_grad() const;
  /// Empty span when the tensor does not require grad.
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  /// Reverse pass from a single-element tensor. Leaf grads accumulate across
  /// calls; intermediate grads are reset at the start of every pass.
  void backward() const;

  /// Deep copy of values as a fresh leaf (same requires_grad flag).
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Builds a result node. Parents and the backward closure are retained only if
/// at least one parent requires grad.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward);

}  // namespace cadd::numeric
