// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/losses.hpp"

#include <cmath>

namespace svbrdf {

void LossWeights::validate() const {
  if (!(lambda_f_disc >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (n_render_views < 0 || n_render_views % 2 != 0) throw InvalidArgument("render view count must be even");
}

ad::TensorF mae(const ad::TensorF& a, const ad::TensorF& b) { return ad::mean(ad::abs(ad::sub(a, b))); }

namespace {

constexpr float kUnitTolerance = 1e-3f;

ad::TensorF ensure_unit(const ad::TensorF& n) {
  if (n.rank() != 4 || n.dim(1) != 3) throw ShapeError("normal field must be (B, 3, H, W)");
  const std::size_t plane = static_cast<std::size_t>(n.dim(2)) * n.dim(3);
  const auto v = n.data();
  for (int b = 0; b < n.dim(0); ++b) {
    const float* p = v.data() + static_cast<std::size_t>(b) * 3 * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const float len2 = p[i] * p[i] + p[plane + i] * p[plane + i] + p[2 * plane + i] * p[2 * plane + i];
      if (std::abs(std::sqrt(len2) - 1.0f) > kUnitTolerance) {
        report_diagnostic("normalize", "angular loss input is not unit length; normalizing");
        return ad::normalize_channels(n);
      }
    }
  }
  return n;
}

ad::TensorF sum_all(const std::vector<ad::TensorF>& terms) {
  ad::TensorF acc;
  for (const auto& t : terms) {
    if (!t.defined()) continue;
    acc = acc.defined() ? ad::add(acc, t) : t;
  }
  return acc.defined() ? acc : ad::TensorF::scalar(0.0f);
}

}  // namespace

ad::TensorF angular_loss(const ad::TensorF& n1, const ad::TensorF& n2) {
  if (n1.shape() != n2.shape()) throw ShapeError("angular loss: shape mismatch");
  const ad::TensorF cosines = ad::dot_channels(ensure_unit(n1), ensure_unit(n2));
  return ad::scale(ad::mean(ad::acos(cosines, 1e-7f)), 1.0f / kPi<float>);
}

ad::TensorF parameter_loss(const ad::TensorF& fake, const ad::TensorF& real) {
  if (fake.shape() != real.shape() || fake.rank() != 4 || fake.dim(1) != 8) {
    throw ShapeError("parameter loss expects matching (B, 8, H, W) tensors");
  }
  const ad::TensorF base = mae(ad::slice_channels(fake, 0, 3), ad::slice_channels(real, 0, 3));
  const ad::TensorF normal = angular_loss(ad::slice_channels(fake, 3, 6), ad::slice_channels(real, 3, 6));
  const ad::TensorF rough = mae(ad::slice_channels(fake, 6, 7), ad::slice_channels(real, 6, 7));
  const ad::TensorF metal = mae(ad::slice_channels(fake, 7, 8), ad::slice_channels(real, 7, 8));
  return ad::scale(sum_all({base, normal, rough, metal}), 0.25f);
}

double parameter_loss(const SvbrdfMaps& fake, const SvbrdfMaps& real) {
  if (fake.height() != real.height() || fake.width() != real.width()) {
    throw ShapeError("parameter loss: resolution mismatch");
  }
  ad::NoGradGuard guard;
  return parameter_loss(maps_to_tensor(std::span(&fake, 1)), maps_to_tensor(std::span(&real, 1))).item();
}

ad::TensorF rendering_loss(const ad::TensorF& fake, const ad::TensorF& real, std::span<const LossView> views,
                           const SceneConfig& cfg) {
  if (fake.shape() != real.shape()) throw ShapeError("rendering loss: shape mismatch");
  if (views.empty()) throw InvalidArgument("rendering loss needs at least one view");
  std::vector<ad::TensorF> terms;
  for (const auto& v : views) {
    ad::TensorF target;
    {
      ad::NoGradGuard guard;
      target = ad::log1p(render(real, v, cfg));
    }
    terms.push_back(mae(ad::log1p(render(fake, v, cfg)), target));
  }
  return ad::scale(sum_all(terms), 1.0f / static_cast<float>(views.size()));
}

ad::TensorF lsgan_d(const ad::TensorF& real_scores, const ad::TensorF& fake_scores) {
  const ad::TensorF r = ad::mean(ad::square(ad::add_scalar(real_scores, -1.0f)));
  const ad::TensorF f = ad::mean(ad::square(fake_scores));
  return ad::scale(ad::add(r, f), 0.5f);
}

ad::TensorF lsgan_g(const ad::TensorF& fake_scores) {
  return ad::scale(ad::mean(ad::square(ad::add_scalar(fake_scores, -1.0f))), 0.5f);
}

ad::TensorF lsgan_d(const ScaleOutputs& real, const ScaleOutputs& fake) {
  return ad::add(lsgan_d(real[0].scores, fake[0].scores), lsgan_d(real[1].scores, fake[1].scores));
}

ad::TensorF lsgan_g(const ScaleOutputs& fake) {
  return ad::add(lsgan_g(fake[0].scores), lsgan_g(fake[1].scores));
}

ad::TensorF feature_matching(const std::vector<std::vector<ad::TensorF>>& real_features,
                             const std::vector<std::vector<ad::TensorF>>& fake_features, bool detach_real) {
  if (real_features.size() != fake_features.size() || real_features.empty()) {
    throw ShapeError("feature matching: scale count mismatch");
  }
  std::vector<ad::TensorF> scales;
  for (std::size_t k = 0; k < real_features.size(); ++k) {
    const auto& rf = real_features[k];
    const auto& ff = fake_features[k];
    if (rf.size() != ff.size() || rf.empty()) throw ShapeError("feature matching: layer count mismatch");
    std::vector<ad::TensorF> layers;
    for (std::size_t i = 0; i < rf.size(); ++i) {
      layers.push_back(ad::mean(ad::square(ad::sub(detach_real ? rf[i].detach() : rf[i], ff[i]))));
    }
    scales.push_back(ad::scale(sum_all(layers), 1.0f / static_cast<float>(rf.size())));
  }
  return ad::scale(sum_all(scales), 1.0f / static_cast<float>(real_features.size()));
}

ad::TensorF feature_matching(const ScaleOutputs& real, const ScaleOutputs& fake, bool detach_real) {
  return feature_matching({real[0].features, real[1].features}, {fake[0].features, fake[1].features}, detach_real);
}

LossTotals total_losses(const LossReport& c, const LossWeights& w) {
  LossTotals t;
  t.total_g = 0.25 * ((w.enable_a ? c.l_a_g : 0.0) + (w.enable_f ? c.l_f : 0.0) + (w.enable_p ? c.l_p : 0.0) +
                      (w.enable_r ? c.l_r : 0.0));
  t.total_d = (w.enable_a ? c.l_a_d : 0.0) + (w.enable_f ? w.lambda_f_disc * c.l_f : 0.0);
  return t;
}

ad::TensorF total_generator_loss(const ad::TensorF& l_a_g, const ad::TensorF& l_f, const ad::TensorF& l_p,
                                 const ad::TensorF& l_r) {
  return ad::scale(sum_all({l_a_g, l_f, l_p, l_r}), 0.25f);
}

}  // namespace svbrdf
