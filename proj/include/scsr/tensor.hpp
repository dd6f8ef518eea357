#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scsr {

/// Rank-4 tensor extent in NCHW order.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::string str() const;

  bool operator==(const Shape&) const = default;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

/// Immutable dense NCHW array of doubles, optionally recorded for reverse-mode
/// differentiation. Copies share the underlying storage (handle semantics).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const { return shape().size(); }
  std::span<const double> data() const;
  double item() const;
  double at(int n, int c, int h, int w) const;
  bool requires_grad() const;

  /// Accumulated gradient; empty until a backward pass reaches this tensor.
  std::span<const double> grad() const;

  /// Same values, cut from the recorded graph.
  Tensor detach() const;

  std::vector<double> to_vector() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// A named trainable (or frozen) leaf tensor. Its gradient buffer always has
/// the value's shape and starts at zero.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool learnable = true);

  const std::string& name() const { return name_; }
  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  bool learnable() const { return learnable_; }

  /// Direct write access for optimizers and checkpoint loading. Must not be
  /// called while a recorded graph that reads this parameter is still pending.
  std::span<double> mutable_data();
  std::span<double> mutable_grad();
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy with fresh storage and zero gradient.
  Parameter clone() const;

 private:
  std::string name_;
  Tensor value_;
  bool learnable_ = true;
};

/// Reachable operations of a scalar root in topological order (parents first).
class Tape {
 public:
  explicit Tape(const Tensor& root);

  std::span<detail::Node* const> nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }

  /// Seeds d(root)/d(root) = 1 and runs every recorded backward rule once in
  /// reverse order. Leaf gradients accumulate; intermediate ones are released.
  void backward();

 private:
  Tensor root_;
  std::vector<detail::Node*> order_;
};

void backward(const Tensor& root);

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace scsr
