#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "xienh/tensor.hpp"

namespace xienh::nn {

/// A recorded value in the computation graph. Interior nodes keep their
/// inputs and a backward closure only while some input requires gradients.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-allocated on first use.
  Tensor<T>& grad_buffer() {
    if (grad.empty() && value.numel() > 0) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a graph node. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Accumulated gradient; a zero tensor when nothing flowed back.
  Tensor<T> grad() const {
    if (node_->grad.empty()) return Tensor<T>(node_->value.shape());
    return node_->grad;
  }
  void zero_grad() { node_->grad = Tensor<T>(); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// When enabled, every op checks its output and throws NonFiniteError on NaN/Inf.
void set_finite_checks(bool enabled);
bool finite_checks();

/// Causal dilated 1-D convolution over the frame axis.
///   y(b, l, o) = bias(o) + sum_w sum_i W(w, i, o) * x(b, l - d*w, i)
/// with x = 0 for negative frame indices. x: (B, L, Cin), weight: (K, Cin, Cout),
/// bias: (1, 1, Cout) or undefined.
template <typename T>
Var<T> conv1d_causal(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int dilation);

/// Per-frame affine map; weight: (1, Cin, Cout).
template <typename T>
Var<T> fully_connected(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

/// Normalises each (b, l) row over channels, then applies gain/bias (1, 1, C).
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));

template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sum(const Var<T>& x);

/// Concatenates along the channel axis; all parts share (B, L).
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

/// Mean binary cross-entropy over valid frames and all channels.
/// pred and target: (B, L, C); mask: (B, L, 1) with 1 for valid frames.
/// pred is clamped to [1e-7, 1 - 1e-7].
template <typename T>
Var<T> bce_loss(const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& mask);

/// Reverse-mode sweep from a scalar. Interior closures are released unless
/// retain_graph is set.
template <typename T>
void backward(const Var<T>& loss, bool retain_graph = false);

}  // namespace xienh::nn
