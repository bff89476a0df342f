// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode automatic differentiation over dense NCHW tensors.
//
// A Tensor is a shared handle to a graph node. Operations on tensors that
// require gradients record their inputs and a backward closure; backward()
// walks the recorded graph in reverse topological order and accumulates
// cotangents into every node that requires a gradient. Only the operators the
// generator, the discriminators and the losses need are provided, and there
// is no broadcasting: binary operators require identical shapes.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svbrdf/common.hpp"

namespace svbrdf::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false) { return from({}, {value}, requires_grad); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  // Direct write access, intended for leaves (parameter updates, input fills).
  std::span<T> mutable_data() { return node_->value; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  // Accumulated gradient; all zeros if nothing reached this tensor.
  std::span<const T> grad() const;
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  // New leaf holding a copy of the values and no graph history.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Gradient recording is enabled by default; the guard disables it on the
// current thread for its lifetime.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds the result node of a custom operation. The backward closure is only
// recorded when gradients are enabled and some input requires them.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      const std::vector<Tensor<T>>& inputs, std::function<void(Node<T>&)> backward);

// Reverse-mode sweep from a scalar loss. Gradients accumulate across calls;
// throws if the loss is not a scalar or the graph contains a cycle.
template <typename T>
void backward(const Tensor<T>& loss);

enum class PadMode { kZero, kReflect };

struct Padding {
  int top = 0, bottom = 0, left = 0, right = 0;
  static Padding uniform(int p) { return {p, p, p, p}; }
};

// Elementwise (identical shapes).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2));
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> log1p(const Tensor<T>& x);
// acos of the input clamped to [-1 + eps, 1 - eps]; zero gradient outside.
template <typename T> Tensor<T> acos(const Tensor<T>& x, T eps = T(1e-7));

// Reductions to a scalar (shape {}), summed in index order.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// Spatial operators on rank-4 (batch, channels, height, width) tensors.
template <typename T> Tensor<T> pad2d(const Tensor<T>& x, Padding p, PadMode mode);
template <typename T> Tensor<T> crop2d(const Tensor<T>& x, Padding p);

// Cross-correlation with weights (out, in, k, k) and optional per-channel
// bias (an undefined tensor means no bias).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 Padding padding = {}, PadMode mode = PadMode::kZero);

// Transposed convolution with weights (in, out, k, k). The full output of
// size (H - 1) stride + k is cropped by `padding` on both sides, minus
// `output_padding` on the bottom/right edge.
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int padding, int output_padding);

// Per (batch, channel) normalization with learnable per-channel affine.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                        T epsilon = T(1e-5));

// 2x2 average pooling (height and width must be even).
template <typename T> Tensor<T> resize_half(const Tensor<T>& x);

template <typename T> Tensor<T> slice_channels(const Tensor<T>& x, int begin, int end);
template <typename T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
// Per-pixel L2 normalization across the channel dimension.
template <typename T> Tensor<T> normalize_channels(const Tensor<T>& x);
// Per-pixel dot product across channels; result has a single channel.
template <typename T> Tensor<T> dot_channels(const Tensor<T>& a, const Tensor<T>& b);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace svbrdf::ad
