// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

// Generator (c7s1-64, d128, d256, d512, 9 x R512, u256, u128, u64, c7s1-8)
// and the two-scale PatchGAN discriminator (cn-64, c128, c256, c512, cns1-1).
// Channel counts are multiplied by a width scale for small-scale runs.

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "svbrdf/checkpoint.hpp"
#include "svbrdf/common.hpp"
#include "svbrdf/tensor.hpp"

namespace svbrdf {

// Scaled channel count: max(1, round(k * scale)).
int scaled_channels(int k, double scale);

struct GeneratorSpec {
  double width_scale = 1.0;
  int residual_blocks = 9;
};

struct DiscriminatorSpec {
  double width_scale = 1.0;
  int input_channels = 11;
};

namespace nn {

// Convolution with optional bias and its padding rule.
struct Conv {
  ad::TensorF weight;
  ad::TensorF bias;  // undefined when a normalization follows
  int stride = 1;
  ad::Padding padding;
  ad::PadMode mode = ad::PadMode::kZero;
  bool transposed = false;
  int output_padding = 0;

  ad::TensorF operator()(const ad::TensorF& x) const;
};

struct InstanceNorm {
  ad::TensorF gamma;
  ad::TensorF beta;

  ad::TensorF operator()(const ad::TensorF& x) const { return ad::instance_norm(x, gamma, beta); }
};

}  // namespace nn

class Generator {
 public:
  Generator(const GeneratorSpec& spec, Rng& rng);

  // (B, 3, H, W) image in [0,1] to (B, 8, H, W) parameters. H and W must be
  // multiples of 8.
  ad::TensorF forward(const ad::TensorF& image) const;

  const NamedTensors& parameters() const { return params_; }
  std::size_t parameter_count() const;
  const GeneratorSpec& spec() const { return spec_; }

 private:
  struct ResidualBlock {
    nn::InstanceNorm norm1, norm2;
    nn::Conv conv1, conv2;
  };

  GeneratorSpec spec_;
  nn::Conv head_;
  std::array<nn::Conv, 3> down_;
  std::array<nn::InstanceNorm, 3> down_norm_;
  std::vector<ResidualBlock> blocks_;
  std::array<nn::Conv, 3> up_;
  std::array<nn::InstanceNorm, 3> up_norm_;
  nn::Conv tail_;
  NamedTensors params_;
};

// Maps raw 8-channel activations to valid parameters: sigmoid base color,
// roughness and metallic; normal = normalize(x, y, softplus(z) + 1e-4).
ad::TensorF parameter_head(const ad::TensorF& raw);

class Discriminator {
 public:
  struct Output {
    ad::TensorF scores;
    std::vector<ad::TensorF> features;  // outputs of the first four layers
  };

  Discriminator(const DiscriminatorSpec& spec, Rng& rng, const std::string& prefix);

  // Input (B, C, H, W) with H and W multiples of 16; scores are H/16 x W/16.
  Output forward(const ad::TensorF& x) const;

  const NamedTensors& parameters() const { return params_; }
  std::size_t parameter_count() const;

 private:
  std::array<nn::Conv, 5> convs_;
  std::array<nn::InstanceNorm, 3> norms_;  // after layers 1..3
  NamedTensors params_;
};

// D1 sees the full-resolution input, D2 the 2x2-averaged one.
class MultiScaleDiscriminator {
 public:
  MultiScaleDiscriminator(const DiscriminatorSpec& spec, Rng& rng);

  // Concatenates image (B,3,H,W) and parameters (B,8,H,W) and runs both
  // scales.
  std::array<Discriminator::Output, 2> discriminate(const ad::TensorF& image, const ad::TensorF& params) const;

  const Discriminator& d1() const { return d1_; }
  const Discriminator& d2() const { return d2_; }
  NamedTensors parameters() const;

 private:
  Discriminator d1_, d2_;
};

}  // namespace svbrdf
