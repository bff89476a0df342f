// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "svbrdf/brdf_core.hpp"
#include "svbrdf/diff_render.hpp"
#include "svbrdf/networks.hpp"
#include "svbrdf/tensor.hpp"

namespace svbrdf {

struct LossWeights {
  bool enable_r = true;  // rendering loss
  bool enable_p = true;  // parameter loss
  bool enable_a = true;  // adversarial loss
  bool enable_f = true;  // feature matching
  double lambda_f_disc = 0.01;
  int n_render_views = 10;

  void validate() const;
};

struct LossReport {
  double l_p = 0.0;
  double l_r = 0.0;
  double l_a_g = 0.0;
  double l_a_d = 0.0;
  double l_f = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;
};

// Mean absolute error over all elements.
ad::TensorF mae(const ad::TensorF& a, const ad::TensorF& b);

// Mean over pixels of acos(n1 . n2) / pi for (B, 3, H, W) normal fields.
// Fields that are not unit length are normalized with a diagnostic.
ad::TensorF angular_loss(const ad::TensorF& n1, const ad::TensorF& n2);

// Unweighted mean of the base color, normal, roughness and metallic terms on
// (B, 8, H, W) parameter tensors.
ad::TensorF parameter_loss(const ad::TensorF& fake, const ad::TensorF& real);
double parameter_loss(const SvbrdfMaps& fake, const SvbrdfMaps& real);

// Mean over views of the MAE between log(1 + render) of both parameter sets.
ad::TensorF rendering_loss(const ad::TensorF& fake, const ad::TensorF& real, std::span<const LossView> views,
                           const SceneConfig& cfg = {});

// Least-squares adversarial terms for one discriminator scale.
ad::TensorF lsgan_d(const ad::TensorF& real_scores, const ad::TensorF& fake_scores);
ad::TensorF lsgan_g(const ad::TensorF& fake_scores);

using ScaleOutputs = std::array<Discriminator::Output, 2>;

// Summed over both discriminator scales.
ad::TensorF lsgan_d(const ScaleOutputs& real, const ScaleOutputs& fake);
ad::TensorF lsgan_g(const ScaleOutputs& fake);

// (1/S) sum_k (1/L) sum_i mean((real - fake)^2). With `detach_real` the real
// features are treated as constants (generator update); the discriminator
// update differentiates through both branches.
ad::TensorF feature_matching(const std::vector<std::vector<ad::TensorF>>& real_features,
                             const std::vector<std::vector<ad::TensorF>>& fake_features, bool detach_real = true);
ad::TensorF feature_matching(const ScaleOutputs& real, const ScaleOutputs& fake, bool detach_real = true);

// Scalar combination: total_g = (L_a(G) + L_f + L_p + L_r) / 4 with disabled
// terms counted as zero, total_d = L_a(D) + lambda L_f.
struct LossTotals {
  double total_g = 0.0;
  double total_d = 0.0;
};
LossTotals total_losses(const LossReport& components, const LossWeights& w);

// Tensor form of total_g; undefined terms are skipped.
ad::TensorF total_generator_loss(const ad::TensorF& l_a_g, const ad::TensorF& l_f, const ad::TensorF& l_p,
                                 const ad::TensorF& l_r);

}  // namespace svbrdf
