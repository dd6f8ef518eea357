#include "scsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "scsr/errors.hpp"

namespace scsr {

namespace {

thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw DimensionError(fmt::format("negative tensor extent {}", shape.str()));
  }
  if (data.size() != shape.size()) {
    throw DimensionError(
        fmt::format("tensor data length {} does not match shape {} ({} elements)", data.size(), shape.str(), shape.size()));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor data");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

}  // namespace

std::string Shape::str() const { return fmt::format("[{}, {}, {}, {}]", n, c, h, w); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(shape.size(), 0.0), requires_grad));
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(shape.size(), value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1, 1, 1, 1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape empty{};
  return node_ ? node_->shape : empty;
}

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError(fmt::format("item() on tensor of shape {}", shape().str()));
  return node_->value[0];
}

double Tensor::at(int n, int c, int h, int w) const {
  const Shape& s = shape();
  if (n < 0 || n >= s.n || c < 0 || c >= s.c || h < 0 || h >= s.h || w < 0 || w >= s.w) {
    throw DimensionError(fmt::format("index ({}, {}, {}, {}) out of range for {}", n, c, h, w, s.str()));
  }
  return node_->value[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape();
  node->value = node_ ? node_->value : std::vector<double>{};
  return Tensor(std::move(node));
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

Parameter::Parameter(std::string name, Tensor value, bool learnable)
    : name_(std::move(name)), learnable_(learnable) {
  if (!value.defined()) throw InvalidArgument("parameter '" + name_ + "' has no value");
  value_ = Tensor::from_data(value.shape(), value.to_vector(), learnable);
}

std::span<double> Parameter::mutable_data() { return value_.node()->value; }

std::span<double> Parameter::mutable_grad() {
  auto& node = *value_.node();
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

std::span<const double> Parameter::grad() const { return value_.grad(); }

void Parameter::zero_grad() {
  auto& node = *value_.node();
  node.grad.assign(node.value.size(), 0.0);
}

Parameter Parameter::clone() const { return Parameter(name_, value_, learnable_); }

Tape::Tape(const Tensor& root) : root_(root) {
  if (!root.defined()) throw InvalidArgument("backward from an undefined tensor");
  if (root.size() != 1) {
    throw DimensionError(fmt::format("backward requires a scalar root, got shape {}", root.shape().str()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    order_.push_back(node);
    stack.pop_back();
  }
}

void Tape::backward() {
  if (order_.empty()) return;
  for (detail::Node* node : order_) {
    if (node->is_leaf()) {
      if (node->grad.size() != node->value.size()) node->grad.assign(node->value.size(), 0.0);
    } else {
      node->grad.assign(node->value.size(), 0.0);
    }
  }
  root_.node()->grad[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(*node);
  }
  for (detail::Node* node : order_) {
    if (!node->is_leaf() && node != root_.node().get()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

void backward(const Tensor& root) { Tape(root).backward(); }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

}  // namespace scsr
