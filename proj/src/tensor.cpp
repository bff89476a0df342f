// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "svbrdf/kernels.hpp"

namespace svbrdf::ad {

namespace {

thread_local bool t_grad_enabled = true;

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ShapeError(std::string(op) + " expects a rank-4 tensor, got " + to_string(s));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <typename T, typename F, typename DF>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, DF df) {
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x}, [df](Node<T>& n) {
    Node<T>& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * df(in.value[i], n.value[i]);
  });
}

template <typename T>
void accumulate(Node<T>& in, std::span<const T> delta) {
  auto& g = in.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return i;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
  if (ad::numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on a tensor with " + std::to_string(numel()) + " elements");
  return node_->value[0];
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return node_->grad_buffer();
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      const std::vector<Tensor<T>>& inputs, std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.defined() && t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const auto& t : inputs) node->inputs.push_back(t.defined() ? t.node() : nullptr);
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) throw ShapeError("backward() requires a scalar loss");
  if (!loss.requires_grad()) return;

  enum : unsigned char { kNew = 0, kActive = 1, kDone = 2 };
  std::unordered_map<Node<T>*, unsigned char> state;
  std::vector<Node<T>*> order;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  Node<T>* root = loss.node().get();
  stack.emplace_back(root, 0);
  state[root] = kActive;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (!child || !child->requires_grad) continue;
      auto& st = state[child];
      if (st == kActive) throw Error("cycle detected in gradient graph");
      if (st == kNew) {
        st = kActive;
        stack.emplace_back(child, 0);
      }
    } else {
      state[node] = kDone;
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    for (auto& in : n.inputs)
      if (in->requires_grad) accumulate<T>(*in, n.grad);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    if (n.inputs[0]->requires_grad) accumulate<T>(*n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) {
      auto& g = n.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    Node<T>& x = *n.inputs[0];
    Node<T>& y = *n.inputs[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary<T>("scale", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary<T>("add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); },
                  [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary<T>("leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
                  [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>("sigmoid", x,
                  [](T v) {
                    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
                    const T e = std::exp(v);
                    return e / (T(1) + e);
                  },
                  [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary<T>("softplus", x,
                  [](T v) { return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
                  [](T v, T) {
                    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
                    const T e = std::exp(v);
                    return e / (T(1) + e);
                  });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>("abs", x, [](T v) { return std::abs(v); },
                  [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> log1p(const Tensor<T>& x) {
  return unary<T>("log1p", x, [](T v) { return std::log1p(v); }, [](T v, T) { return T(1) / (T(1) + v); });
}

template <typename T>
Tensor<T> acos(const Tensor<T>& x, T eps) {
  const T lo = T(-1) + eps, hi = T(1) - eps;
  return unary<T>("acos", x, [lo, hi](T v) { return std::acos(std::clamp(v, lo, hi)); },
                  [lo, hi](T v, T) { return (v > lo && v < hi) ? T(-1) / std::sqrt(T(1) - v * v) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>("sum", {}, {acc}, {x}, [](Node<T>& n) {
    Node<T>& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (T& v : g) v += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  T acc = 0;
  for (T v : x.data()) acc += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  return make_result<T>("mean", {}, {acc * inv}, {x}, [inv](Node<T>& n) {
    Node<T>& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const T d = n.grad[0] * inv;
    for (T& v : g) v += d;
  });
}

// ---------------------------------------------------------------------------
// Spatial

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, Padding p, PadMode mode) {
  require_rank4(x.shape(), "pad2d");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (mode == PadMode::kReflect && (std::max(p.top, p.bottom) >= H || std::max(p.left, p.right) >= W)) {
    throw ShapeError("reflection padding must be smaller than the input");
  }
  const int Ho = H + p.top + p.bottom, Wo = W + p.left + p.right;
  // Source index for every output element (-1 for zero padding).
  auto source = [=](int oy, int ox) -> std::ptrdiff_t {
    int y = oy - p.top, x0 = ox - p.left;
    if (mode == PadMode::kReflect) {
      y = reflect_index(y, H);
      x0 = reflect_index(x0, W);
    } else if (y < 0 || y >= H || x0 < 0 || x0 >= W) {
      return -1;
    }
    return static_cast<std::ptrdiff_t>(y) * W + x0;
  };
  const int planes = B * C;
  std::vector<T> out(static_cast<std::size_t>(planes) * Ho * Wo);
  const auto xv = x.data();
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (int pc = 0; pc < planes; ++pc) {
    const T* src = xv.data() + static_cast<std::size_t>(pc) * H * W;
    T* dst = out.data() + static_cast<std::size_t>(pc) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        const auto s = source(oy, ox);
        dst[oy * Wo + ox] = s < 0 ? T(0) : src[s];
      }
  }
  return make_result<T>("pad2d", {B, C, Ho, Wo}, std::move(out), {x},
                        [=](Node<T>& n) {
                          Node<T>& in = *n.inputs[0];
                          if (!in.requires_grad) return;
                          auto& g = in.grad_buffer();
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
                          for (int pc = 0; pc < planes; ++pc) {
                            T* dst = g.data() + static_cast<std::size_t>(pc) * H * W;
                            const T* src = n.grad.data() + static_cast<std::size_t>(pc) * Ho * Wo;
                            for (int oy = 0; oy < Ho; ++oy)
                              for (int ox = 0; ox < Wo; ++ox) {
                                const auto s = source(oy, ox);
                                if (s >= 0) dst[s] += src[oy * Wo + ox];
                              }
                          }
                        });
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, Padding p) {
  require_rank4(x.shape(), "crop2d");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = H - p.top - p.bottom, Wo = W - p.left - p.right;
  if (Ho <= 0 || Wo <= 0 || p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) {
    throw ShapeError("invalid crop for " + to_string(x.shape()));
  }
  const int planes = B * C;
  std::vector<T> out(static_cast<std::size_t>(planes) * Ho * Wo);
  const auto xv = x.data();
  for (int pc = 0; pc < planes; ++pc)
    for (int y = 0; y < Ho; ++y) {
      const T* src = xv.data() + (static_cast<std::size_t>(pc) * H + y + p.top) * W + p.left;
      std::copy(src, src + Wo, out.data() + (static_cast<std::size_t>(pc) * Ho + y) * Wo);
    }
  return make_result<T>("crop2d", {B, C, Ho, Wo}, std::move(out), {x}, [=](Node<T>& n) {
    Node<T>& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int pc = 0; pc < planes; ++pc)
      for (int y = 0; y < Ho; ++y) {
        T* dst = g.data() + (static_cast<std::size_t>(pc) * H + y + p.top) * W + p.left;
        const T* src = n.grad.data() + (static_cast<std::size_t>(pc) * Ho + y) * Wo;
        for (int xx = 0; xx < Wo; ++xx) dst[xx] += src[xx];
      }
  });
}

namespace {

template <typename T>
void add_bias(std::vector<T>& out, const Tensor<T>& bias, int batch, int channels, std::size_t pixels) {
  if (!bias.defined()) return;
  if (bias.numel() != static_cast<std::size_t>(channels)) throw ShapeError("bias length mismatch");
  const auto bv = bias.data();
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c) {
      T* p = out.data() + (static_cast<std::size_t>(b) * channels + c) * pixels;
      for (std::size_t i = 0; i < pixels; ++i) p[i] += bv[c];
    }
}

template <typename T>
void bias_grad(Node<T>& bias, std::span<const T> grad, int batch, int channels, std::size_t pixels) {
  auto& g = bias.grad_buffer();
  for (int c = 0; c < channels; ++c) {
    T acc = 0;
    for (int b = 0; b < batch; ++b) {
      const T* p = grad.data() + (static_cast<std::size_t>(b) * channels + c) * pixels;
      for (std::size_t i = 0; i < pixels; ++i) acc += p[i];
    }
    g[c] += acc;
  }
}

// Unpadded convolution node.
template <typename T>
Tensor<T> conv_valid(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride) {
  require_rank4(x.shape(), "conv2d");
  require_rank4(w.shape(), "conv2d weight");
  if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d requires square kernels");
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(x.shape()) + ", weight " + to_string(w.shape()));
  }
  kernels::ConvShape cs{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride};
  if (cs.in_height < cs.kernel || cs.in_width < cs.kernel) throw ShapeError("conv2d input smaller than kernel");
  std::vector<T> out(cs.output_size());
  kernels::conv_forward<T>(cs, x.data(), w.data(), out);
  const std::size_t pixels = static_cast<std::size_t>(cs.out_height()) * cs.out_width();
  add_bias(out, bias, cs.batch, cs.out_channels, pixels);
  return make_result<T>("conv2d", {cs.batch, cs.out_channels, cs.out_height(), cs.out_width()}, std::move(out),
                        {x, w, bias}, [cs, pixels](Node<T>& n) {
                          Node<T>& xn = *n.inputs[0];
                          Node<T>& wn = *n.inputs[1];
                          if (xn.requires_grad) {
                            kernels::conv_backward_input<T>(cs, n.grad, wn.value, xn.grad_buffer());
                          }
                          if (wn.requires_grad) {
                            kernels::conv_backward_weight<T>(cs, xn.value, n.grad, wn.grad_buffer());
                          }
                          if (n.inputs[2] && n.inputs[2]->requires_grad) {
                            bias_grad<T>(*n.inputs[2], n.grad, cs.batch, cs.out_channels, pixels);
                          }
                        });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 Padding padding, PadMode mode) {
  if (stride <= 0) throw InvalidArgument("conv2d stride must be positive");
  const bool padded = padding.top || padding.bottom || padding.left || padding.right;
  return conv_valid(padded ? pad2d(x, padding, mode) : x, weight, bias, stride);
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding, int output_padding) {
  require_rank4(x.shape(), "conv2d_transpose");
  require_rank4(weight.shape(), "conv2d_transpose weight");
  if (x.dim(1) != weight.dim(0)) throw ShapeError("conv2d_transpose channel mismatch");
  if (weight.dim(2) != weight.dim(3)) throw ShapeError("conv2d_transpose requires square kernels");
  if (padding - output_padding < 0) throw InvalidArgument("output_padding exceeds padding");
  const int k = weight.dim(2);
  // The adjoint of a valid convolution from the full output back to x.
  kernels::ConvShape cs{x.dim(0), weight.dim(1), (x.dim(2) - 1) * stride + k, (x.dim(3) - 1) * stride + k,
                        x.dim(1), k, stride};
  std::vector<T> full(cs.input_size(), T(0));
  kernels::conv_backward_input<T>(cs, x.data(), weight.data(), full);
  const std::size_t pixels = static_cast<std::size_t>(cs.in_height) * cs.in_width;
  add_bias(full, bias, cs.batch, cs.in_channels, pixels);
  auto result = make_result<T>(
      "conv2d_transpose", {cs.batch, cs.in_channels, cs.in_height, cs.in_width}, std::move(full),
      {x, weight, bias}, [cs, pixels](Node<T>& n) {
        Node<T>& xn = *n.inputs[0];
        Node<T>& wn = *n.inputs[1];
        if (xn.requires_grad) {
          std::vector<T> tmp(cs.output_size());
          kernels::conv_forward<T>(cs, n.grad, wn.value, tmp);
          accumulate<T>(xn, tmp);
        }
        if (wn.requires_grad) kernels::conv_backward_weight<T>(cs, n.grad, xn.value, wn.grad_buffer());
        if (n.inputs[2] && n.inputs[2]->requires_grad) {
          bias_grad<T>(*n.inputs[2], n.grad, cs.batch, cs.in_channels, pixels);
        }
      });
  const int tail = padding - output_padding;
  if (padding == 0 && tail == 0) return result;
  return crop2d(result, Padding{padding, tail, padding, tail});
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T epsilon) {
  require_rank4(x.shape(), "instance_norm");
  const kernels::NormShape ns{x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
  if (ns.pixels < 2) throw ShapeError("instance_norm needs at least two pixels per channel");
  if (gamma.numel() != static_cast<std::size_t>(ns.channels) || beta.numel() != static_cast<std::size_t>(ns.channels)) {
    throw ShapeError("instance_norm affine parameters must have one entry per channel");
  }
  std::vector<T> out(x.numel()), xhat(x.numel()), inv_std(static_cast<std::size_t>(ns.batch) * ns.channels);
  kernels::instance_norm_forward<T>(ns, x.data(), gamma.data(), beta.data(), epsilon, out, xhat, inv_std);
  return make_result<T>("instance_norm", x.shape(), std::move(out), {x, gamma, beta},
                        [ns, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& n) {
                          Node<T>& xn = *n.inputs[0];
                          Node<T>& gn = *n.inputs[1];
                          Node<T>& bn = *n.inputs[2];
                          std::span<T> gx, gg, gb;
                          if (xn.requires_grad) gx = xn.grad_buffer();
                          if (gn.requires_grad) gg = gn.grad_buffer();
                          if (bn.requires_grad) gb = bn.grad_buffer();
                          kernels::instance_norm_backward<T>(ns, xhat, inv_std, gn.value, n.grad, gx, gg, gb);
                        });
}

template <typename T>
Tensor<T> resize_half(const Tensor<T>& x) {
  require_rank4(x.shape(), "resize_half");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 || W % 2) throw ShapeError("resize_half needs even spatial size, got " + to_string(x.shape()));
  const int Ho = H / 2, Wo = W / 2, planes = B * C;
  std::vector<T> out(static_cast<std::size_t>(planes) * Ho * Wo);
  const auto xv = x.data();
  for (int pc = 0; pc < planes; ++pc)
    for (int y = 0; y < Ho; ++y)
      for (int xx = 0; xx < Wo; ++xx) {
        const T* s = xv.data() + (static_cast<std::size_t>(pc) * H + 2 * y) * W + 2 * xx;
        out[(static_cast<std::size_t>(pc) * Ho + y) * Wo + xx] = T(0.25) * (s[0] + s[1] + s[W] + s[W + 1]);
      }
  return make_result<T>("resize_half", {B, C, Ho, Wo}, std::move(out), {x}, [=](Node<T>& n) {
    Node<T>& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int pc = 0; pc < planes; ++pc)
      for (int y = 0; y < Ho; ++y)
        for (int xx = 0; xx < Wo; ++xx) {
          const T d = T(0.25) * n.grad[(static_cast<std::size_t>(pc) * Ho + y) * Wo + xx];
          T* s = g.data() + (static_cast<std::size_t>(pc) * H + 2 * y) * W + 2 * xx;
          s[0] += d;
          s[1] += d;
          s[W] += d;
          s[W + 1] += d;
        }
  });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int end) {
  require_rank4(x.shape(), "slice_channels");
  const int B = x.dim(0), C = x.dim(1);
  if (begin < 0 || end > C || begin >= end) throw ShapeError("invalid channel slice");
  const std::size_t P = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const int Cs = end - begin;
  std::vector<T> out(static_cast<std::size_t>(B) * Cs * P);
  const auto xv = x.data();
  for (int b = 0; b < B; ++b) {
    const T* src = xv.data() + (static_cast<std::size_t>(b) * C + begin) * P;
    std::copy(src, src + Cs * P, out.data() + static_cast<std::size_t>(b) * Cs * P);
  }
  return make_result<T>("slice_channels", {B, Cs, x.dim(2), x.dim(3)}, std::move(out), {x},
                        [=](Node<T>& n) {
                          Node<T>& in = *n.inputs[0];
                          if (!in.requires_grad) return;
                          auto& g = in.grad_buffer();
                          for (int b = 0; b < B; ++b) {
                            T* dst = g.data() + (static_cast<std::size_t>(b) * C + begin) * P;
                            const T* src = n.grad.data() + static_cast<std::size_t>(b) * Cs * P;
                            for (std::size_t i = 0; i < Cs * P; ++i) dst[i] += src[i];
                          }
                        });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels of nothing");
  require_rank4(parts[0].shape(), "concat_channels");
  const int B = parts[0].dim(0), H = parts[0].dim(2), W = parts[0].dim(3);
  std::vector<int> offsets;
  int C = 0;
  for (const auto& p : parts) {
    require_rank4(p.shape(), "concat_channels");
    if (p.dim(0) != B || p.dim(2) != H || p.dim(3) != W) {
      throw ShapeError("concat_channels: incompatible " + to_string(p.shape()));
    }
    offsets.push_back(C);
    C += p.dim(1);
  }
  const std::size_t P = static_cast<std::size_t>(H) * W;
  std::vector<T> out(static_cast<std::size_t>(B) * C * P);
  std::vector<int> widths;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const int Ck = parts[k].dim(1);
    widths.push_back(Ck);
    const auto v = parts[k].data();
    for (int b = 0; b < B; ++b) {
      std::copy(v.data() + static_cast<std::size_t>(b) * Ck * P, v.data() + static_cast<std::size_t>(b + 1) * Ck * P,
                out.data() + (static_cast<std::size_t>(b) * C + offsets[k]) * P);
    }
  }
  return make_result<T>("concat_channels", {B, C, H, W}, std::move(out), parts,
                        [=](Node<T>& n) {
                          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                            Node<T>& in = *n.inputs[k];
                            if (!in.requires_grad) continue;
                            auto& g = in.grad_buffer();
                            const int Ck = widths[k];
                            for (int b = 0; b < B; ++b) {
                              const T* src = n.grad.data() + (static_cast<std::size_t>(b) * C + offsets[k]) * P;
                              T* dst = g.data() + static_cast<std::size_t>(b) * Ck * P;
                              for (std::size_t i = 0; i < Ck * P; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> normalize_channels(const Tensor<T>& x) {
  require_rank4(x.shape(), "normalize_channels");
  const int B = x.dim(0), C = x.dim(1);
  const std::size_t P = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  std::vector<T> out(x.numel());
  std::vector<T> inv_len(static_cast<std::size_t>(B) * P);
  const auto xv = x.data();
  for (int b = 0; b < B; ++b)
    for (std::size_t i = 0; i < P; ++i) {
      T ss = 0;
      for (int c = 0; c < C; ++c) {
        const T v = xv[(static_cast<std::size_t>(b) * C + c) * P + i];
        ss += v * v;
      }
      const T il = T(1) / std::max(std::sqrt(ss), T(1e-12));
      inv_len[b * P + i] = il;
      for (int c = 0; c < C; ++c) {
        const std::size_t idx = (static_cast<std::size_t>(b) * C + c) * P + i;
        out[idx] = xv[idx] * il;
      }
    }
  return make_result<T>("normalize_channels", x.shape(), std::move(out), {x},
                        [=, inv_len = std::move(inv_len)](Node<T>& n) {
                          Node<T>& in = *n.inputs[0];
                          if (!in.requires_grad) return;
                          auto& g = in.grad_buffer();
                          for (int b = 0; b < B; ++b)
                            for (std::size_t i = 0; i < P; ++i) {
                              T yg = 0;
                              for (int c = 0; c < C; ++c) {
                                const std::size_t idx = (static_cast<std::size_t>(b) * C + c) * P + i;
                                yg += n.value[idx] * n.grad[idx];
                              }
                              const T il = inv_len[b * P + i];
                              for (int c = 0; c < C; ++c) {
                                const std::size_t idx = (static_cast<std::size_t>(b) * C + c) * P + i;
                                g[idx] += (n.grad[idx] - n.value[idx] * yg) * il;
                              }
                            }
                        });
}

template <typename T>
Tensor<T> dot_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank4(a.shape(), "dot_channels");
  require_same_shape(a.shape(), b.shape(), "dot_channels");
  const int B = a.dim(0), C = a.dim(1);
  const std::size_t P = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  std::vector<T> out(static_cast<std::size_t>(B) * P, T(0));
  const auto av = a.data(), bv = b.data();
  for (int bb = 0; bb < B; ++bb)
    for (int c = 0; c < C; ++c)
      for (std::size_t i = 0; i < P; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(bb) * C + c) * P + i;
        out[bb * P + i] += av[idx] * bv[idx];
      }
  return make_result<T>("dot_channels", {B, 1, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                        [=](Node<T>& n) {
                          Node<T>& an = *n.inputs[0];
                          Node<T>& bn = *n.inputs[1];
                          for (int bb = 0; bb < B; ++bb)
                            for (int c = 0; c < C; ++c)
                              for (std::size_t i = 0; i < P; ++i) {
                                const std::size_t idx = (static_cast<std::size_t>(bb) * C + c) * P + i;
                                const T g = n.grad[bb * P + i];
                                if (an.requires_grad) an.grad_buffer()[idx] += g * bn.value[idx];
                                if (bn.requires_grad) bn.grad_buffer()[idx] += g * an.value[idx];
                              }
                        });
}

#define SVBRDF_INSTANTIATE_AD(T)                                                                  \
  template class Tensor<T>;                                                                       \
  template Tensor<T> make_result<T>(const char*, Shape, std::vector<T>, const std::vector<Tensor<T>>&, \
                                    std::function<void(Node<T>&)>);                               \
  template void backward<T>(const Tensor<T>&);                                                    \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                          \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                   \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                                          \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                \
  template Tensor<T> softplus<T>(const Tensor<T>&);                                               \
  template Tensor<T> abs<T>(const Tensor<T>&);                                                    \
  template Tensor<T> square<T>(const Tensor<T>&);                                                 \
  template Tensor<T> log<T>(const Tensor<T>&);                                                    \
  template Tensor<T> log1p<T>(const Tensor<T>&);                                                  \
  template Tensor<T> acos<T>(const Tensor<T>&, T);                                                \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                    \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                   \
  template Tensor<T> pad2d<T>(const Tensor<T>&, Padding, PadMode);                                \
  template Tensor<T> crop2d<T>(const Tensor<T>&, Padding);                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, Padding, PadMode); \
  template Tensor<T> conv2d_transpose<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int, int); \
  template Tensor<T> instance_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);   \
  template Tensor<T> resize_half<T>(const Tensor<T>&);                                            \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, int, int);                               \
  template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);                           \
  template Tensor<T> normalize_channels<T>(const Tensor<T>&);                                     \
  template Tensor<T> dot_channels<T>(const Tensor<T>&, const Tensor<T>&);

SVBRDF_INSTANTIATE_AD(float)
SVBRDF_INSTANTIATE_AD(double)

#undef SVBRDF_INSTANTIATE_AD

}  // namespace svbrdf::ad
