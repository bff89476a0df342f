// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

namespace svbrdf::kernels {

// Geometry of an unpadded 2-D cross-correlation over NCHW data with a square
// kernel. Weights are laid out (out_channels, in_channels, kernel, kernel).
struct ConvShape {
  int batch = 1;
  int in_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;

  int out_height() const { return (in_height - kernel) / stride + 1; }
  int out_width() const { return (in_width - kernel) / stride + 1; }
  std::size_t input_size() const {
    return static_cast<std::size_t>(batch) * in_channels * in_height * in_width;
  }
  std::size_t output_size() const {
    return static_cast<std::size_t>(batch) * out_channels * out_height() * out_width();
  }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
};

struct NormShape {
  int batch = 1;
  int channels = 1;
  int pixels = 1;
};

// The kernels below are OpenMP-parallel. Every output element is produced by
// exactly one task with a reduction order that depends only on the problem
// shape, so results are independent of the thread count.

// output = conv(input, weight); output is overwritten.
template <typename T>
void conv_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                  std::span<T> output);

// grad_input += conv^T(grad_output, weight). Also serves as the forward pass
// of a transposed convolution.
template <typename T>
void conv_backward_input(const ConvShape& s, std::span<const T> grad_output,
                         std::span<const T> weight, std::span<T> grad_input);

// grad_weight += d<conv(input, w), grad_output>/dw.
template <typename T>
void conv_backward_weight(const ConvShape& s, std::span<const T> input,
                          std::span<const T> grad_output, std::span<T> grad_weight);

// Per (batch, channel) standardization followed by a per-channel affine map.
// Writes `normalized` (x_hat) and `inv_std` for the backward pass.
template <typename T>
void instance_norm_forward(const NormShape& s, std::span<const T> input, std::span<const T> gamma,
                           std::span<const T> beta, T epsilon, std::span<T> output,
                           std::span<T> normalized, std::span<T> inv_std);

// Accumulates into grad_input, grad_gamma and grad_beta.
template <typename T>
void instance_norm_backward(const NormShape& s, std::span<const T> normalized,
                            std::span<const T> inv_std, std::span<const T> gamma,
                            std::span<const T> grad_output, std::span<T> grad_input,
                            std::span<T> grad_gamma, std::span<T> grad_beta);

// Straightforward serial implementations of the same contracts. They are the
// definition the parallel kernels are tested against and benchmarked with.
namespace reference {

template <typename T>
void conv_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                  std::span<T> output);
template <typename T>
void conv_backward_input(const ConvShape& s, std::span<const T> grad_output,
                         std::span<const T> weight, std::span<T> grad_input);
template <typename T>
void conv_backward_weight(const ConvShape& s, std::span<const T> input,
                          std::span<const T> grad_output, std::span<T> grad_weight);
template <typename T>
void instance_norm_forward(const NormShape& s, std::span<const T> input, std::span<const T> gamma,
                           std::span<const T> beta, T epsilon, std::span<T> output,
                           std::span<T> normalized, std::span<T> inv_std);
template <typename T>
void instance_norm_backward(const NormShape& s, std::span<const T> normalized,
                            std::span<const T> inv_std, std::span<const T> gamma,
                            std::span<const T> grad_output, std::span<T> grad_input,
                            std::span<T> grad_gamma, std::span<T> grad_beta);

}  // namespace reference

// Worker count used by the kernels; honors SVBRDF_THREADS when set.
int max_threads();
void set_max_threads(int n);

}  // namespace svbrdf::kernels
