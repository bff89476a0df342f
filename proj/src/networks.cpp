// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/networks.hpp"

#include <cmath>

namespace svbrdf {

int scaled_channels(int k, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("width scale must be positive");
  return std::max(1, static_cast<int>(std::lround(k * scale)));
}

namespace nn {

ad::TensorF Conv::operator()(const ad::TensorF& x) const {
  if (transposed) return ad::conv2d_transpose(x, weight, bias, stride, padding.top, output_padding);
  return ad::conv2d(x, weight, bias, stride, padding, mode);
}

}  // namespace nn

namespace {

constexpr float kInitStddev = 0.02f;

ad::TensorF random_weight(ad::Shape shape, Rng& rng) {
  std::vector<float> data(ad::numel(shape));
  for (float& v : data) v = static_cast<float>(rng.normal(0.0, kInitStddev));
  return ad::TensorF::from(std::move(shape), std::move(data), true);
}

nn::Conv make_conv(int in, int out, int k, int stride, ad::Padding pad, ad::PadMode mode, bool bias, Rng& rng) {
  nn::Conv c;
  c.weight = random_weight({out, in, k, k}, rng);
  if (bias) c.bias = ad::TensorF::zeros({out}, true);
  c.stride = stride;
  c.padding = pad;
  c.mode = mode;
  return c;
}

nn::Conv make_conv_transpose(int in, int out, Rng& rng) {
  nn::Conv c;
  c.weight = random_weight({in, out, 3, 3}, rng);
  c.stride = 2;
  c.padding = ad::Padding::uniform(1);
  c.transposed = true;
  c.output_padding = 1;
  return c;
}

nn::InstanceNorm make_norm(int channels) {
  return {ad::TensorF::full({channels}, 1.0f, true), ad::TensorF::zeros({channels}, true)};
}

void add_conv(NamedTensors& out, const std::string& name, const nn::Conv& c) {
  out.emplace_back(name + ".weight", c.weight);
  if (c.bias.defined()) out.emplace_back(name + ".bias", c.bias);
}

void add_norm(NamedTensors& out, const std::string& name, const nn::InstanceNorm& n) {
  out.emplace_back(name + ".gamma", n.gamma);
  out.emplace_back(name + ".beta", n.beta);
}

std::size_t count(const NamedTensors& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

}  // namespace

Generator::Generator(const GeneratorSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.residual_blocks < 0) throw InvalidArgument("residual block count must be non-negative");
  const double s = spec.width_scale;
  const int c64 = scaled_channels(64, s), c128 = scaled_channels(128, s), c256 = scaled_channels(256, s),
            c512 = scaled_channels(512, s);
  const auto reflect = ad::PadMode::kReflect;
  const auto zero = ad::PadMode::kZero;

  head_ = make_conv(3, c64, 7, 1, ad::Padding::uniform(3), reflect, true, rng);
  add_conv(params_, "c7s1_in", head_);

  const std::array<int, 4> down_ch = {c64, c128, c256, c512};
  for (int i = 0; i < 3; ++i) {
    down_[i] = make_conv(down_ch[i], down_ch[i + 1], 3, 2, ad::Padding::uniform(1), zero, false, rng);
    down_norm_[i] = make_norm(down_ch[i + 1]);
    add_conv(params_, "d" + std::to_string(i), down_[i]);
    add_norm(params_, "d" + std::to_string(i) + ".norm", down_norm_[i]);
  }

  for (int b = 0; b < spec.residual_blocks; ++b) {
    ResidualBlock blk;
    blk.norm1 = make_norm(c512);
    blk.conv1 = make_conv(c512, c512, 3, 1, ad::Padding::uniform(1), reflect, false, rng);
    blk.norm2 = make_norm(c512);
    blk.conv2 = make_conv(c512, c512, 3, 1, ad::Padding::uniform(1), reflect, false, rng);
    const std::string name = "R" + std::to_string(b);
    add_norm(params_, name + ".norm1", blk.norm1);
    add_conv(params_, name + ".conv1", blk.conv1);
    add_norm(params_, name + ".norm2", blk.norm2);
    add_conv(params_, name + ".conv2", blk.conv2);
    blocks_.push_back(std::move(blk));
  }

  const std::array<int, 4> up_ch = {c512, c256, c128, c64};
  for (int i = 0; i < 3; ++i) {
    up_[i] = make_conv_transpose(up_ch[i], up_ch[i + 1], rng);
    up_norm_[i] = make_norm(up_ch[i + 1]);
    add_conv(params_, "u" + std::to_string(i), up_[i]);
    add_norm(params_, "u" + std::to_string(i) + ".norm", up_norm_[i]);
  }

  tail_ = make_conv(c64, 8, 7, 1, ad::Padding::uniform(3), reflect, true, rng);
  add_conv(params_, "c7s1_out", tail_);
}

std::size_t Generator::parameter_count() const { return count(params_); }

ad::TensorF Generator::forward(const ad::TensorF& image) const {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw ShapeError("generator expects a (B, 3, H, W) image, got " + ad::to_string(image.shape()));
  }
  if (image.dim(2) % 8 != 0 || image.dim(3) % 8 != 0) {
    throw ShapeError("generator input height and width must be multiples of 8");
  }
  ad::TensorF x = ad::relu(head_(image));
  for (int i = 0; i < 3; ++i) x = ad::relu(down_norm_[i](down_[i](x)));
  for (const auto& blk : blocks_) {
    ad::TensorF h = blk.conv1(ad::relu(blk.norm1(x)));
    h = blk.conv2(ad::relu(blk.norm2(h)));
    x = ad::add(x, h);
  }
  for (int i = 0; i < 3; ++i) x = ad::relu(up_norm_[i](up_[i](x)));
  return parameter_head(tail_(x));
}

ad::TensorF parameter_head(const ad::TensorF& raw) {
  if (raw.rank() != 4 || raw.dim(1) != 8) throw ShapeError("parameter head expects 8 channels");
  const ad::TensorF base = ad::sigmoid(ad::slice_channels(raw, 0, 3));
  const ad::TensorF nz = ad::add_scalar(ad::softplus(ad::slice_channels(raw, 5, 6)), 1e-4f);
  const ad::TensorF normal = ad::normalize_channels(ad::concat_channels<float>({ad::slice_channels(raw, 3, 5), nz}));
  const ad::TensorF rm = ad::sigmoid(ad::slice_channels(raw, 6, 8));
  return ad::concat_channels<float>({base, normal, rm});
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, Rng& rng, const std::string& prefix) {
  const double s = spec.width_scale;
  const std::array<int, 5> ch = {spec.input_channels, scaled_channels(64, s), scaled_channels(128, s),
                                 scaled_channels(256, s), scaled_channels(512, s)};
  const auto zero = ad::PadMode::kZero;
  for (int i = 0; i < 4; ++i) {
    convs_[i] = make_conv(ch[i], ch[i + 1], 4, 2, ad::Padding::uniform(1), zero, i == 0, rng);
    add_conv(params_, prefix + ".c" + std::to_string(i), convs_[i]);
    if (i > 0) {
      norms_[i - 1] = make_norm(ch[i + 1]);
      add_norm(params_, prefix + ".c" + std::to_string(i) + ".norm", norms_[i - 1]);
    }
  }
  // Stride-1 4x4 layer padded asymmetrically so the score map keeps its size.
  convs_[4] = make_conv(ch[4], 1, 4, 1, ad::Padding{1, 2, 1, 2}, zero, true, rng);
  add_conv(params_, prefix + ".c4", convs_[4]);
}

std::size_t Discriminator::parameter_count() const { return count(params_); }

Discriminator::Output Discriminator::forward(const ad::TensorF& x) const {
  if (x.rank() != 4 || x.dim(2) % 16 != 0 || x.dim(3) % 16 != 0 || x.dim(2) < 32 || x.dim(3) < 32) {
    throw ShapeError("discriminator input must be (B, C, H, W) with H, W multiples of 16 and at least 32, got " +
                     ad::to_string(x.shape()));
  }
  Output out;
  ad::TensorF h = x;
  for (int i = 0; i < 4; ++i) {
    h = convs_[i](h);
    if (i > 0) h = norms_[i - 1](h);
    h = ad::leaky_relu(h, 0.2f);
    out.features.push_back(h);
  }
  out.scores = ad::leaky_relu(convs_[4](h), 0.2f);
  return out;
}

MultiScaleDiscriminator::MultiScaleDiscriminator(const DiscriminatorSpec& spec, Rng& rng)
    : d1_(spec, rng, "D1"), d2_(spec, rng, "D2") {}

std::array<Discriminator::Output, 2> MultiScaleDiscriminator::discriminate(const ad::TensorF& image,
                                                                           const ad::TensorF& params) const {
  if (image.rank() != 4 || params.rank() != 4 || image.dim(0) != params.dim(0) || image.dim(2) != params.dim(2) ||
      image.dim(3) != params.dim(3)) {
    throw ShapeError("image " + ad::to_string(image.shape()) + " and parameters " + ad::to_string(params.shape()) +
                     " do not match");
  }
  const ad::TensorF x = ad::concat_channels<float>({image, params});
  return {d1_.forward(x), d2_.forward(ad::resize_half(x))};
}

NamedTensors MultiScaleDiscriminator::parameters() const {
  NamedTensors all = d1_.parameters();
  const auto& p2 = d2_.parameters();
  all.insert(all.end(), p2.begin(), p2.end());
  return all;
}

}  // namespace svbrdf
