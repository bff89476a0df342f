// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "svbrdf/losses.hpp"
#include "svbrdf/shading.hpp"
#include "test_support.hpp"

using namespace svbrdf;
using ad::TensorD;
using ad::TensorF;

namespace {

TensorF tensor_of(const SvbrdfMaps& m, bool grad = false) {
  const TensorF t = maps_to_tensor(std::span<const SvbrdfMaps>(&m, 1));
  return TensorF::from(t.shape(), std::vector<float>(t.data().begin(), t.data().end()), grad);
}

TensorF normals(std::vector<float> xyz_per_pixel, int pixels) {
  std::vector<float> planar(3 * pixels);
  for (int p = 0; p < pixels; ++p)
    for (int c = 0; c < 3; ++c) planar[c * pixels + p] = xyz_per_pixel[3 * p + c];
  return TensorF::from({1, 3, 1, pixels}, std::move(planar));
}

Discriminator::Output constant_output(float score, std::vector<float> feats) {
  Discriminator::Output o;
  o.scores = TensorF::full({1, 1, 2, 2}, score);
  for (float f : feats) o.features.push_back(TensorF::full({1, 2, 2, 2}, f));
  return o;
}

// Independent double-precision composition of the rendering loss.
double rendering_loss_reference(const std::vector<double>& fake, const std::vector<double>& real, int res,
                                std::span<const LossView> views, const SceneConfig& cfg) {
  const TensorD f = TensorD::from({1, kNumParams, res, res}, fake);
  const TensorD r = TensorD::from({1, kNumParams, res, res}, real);
  double total = 0.0;
  for (const LossView& v : views) {
    const TensorD a = svbrdf::render<double>(f, v, cfg);
    const TensorD b = svbrdf::render<double>(r, v, cfg);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(std::log1p(a.data()[i]) - std::log1p(b.data()[i]));
    total += s / static_cast<double>(a.numel());
  }
  return total / static_cast<double>(views.size());
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("mae examples") {
    CHECK(mae(TensorF::full({2, 3}, 0.4f), TensorF::full({2, 3}, 0.4f)).item() == 0.0f);
    CHECK(mae(TensorF::zeros({4}), TensorF::full({4}, 1.0f)).item() == doctest::Approx(1.0));
    CHECK(mae(TensorF::from({2}, {0.0f, 1.0f}), TensorF::from({2}, {1.0f, 0.0f})).item() == doctest::Approx(1.0));
    CHECK_THROWS_AS(mae(TensorF::zeros({2}), TensorF::zeros({3})), ShapeError);
  }

  TEST_CASE("angular loss examples") {
    const TensorF up = normals({0, 0, 1, 0, 0, 1}, 2);
    CHECK(angular_loss(up, up).item() < 1e-3f);
    CHECK(angular_loss(up, normals({0, 0, -1, 0, 0, -1}, 2)).item() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(angular_loss(up, normals({1, 0, 0, 0, 1, 0}, 2)).item() == doctest::Approx(0.5).epsilon(1e-5));
    // Non-unit fields are normalized.
    CHECK(angular_loss(up, normals({2, 0, 0, 0, 3, 0}, 2)).item() == doctest::Approx(0.5).epsilon(1e-5));
  }

  TEST_CASE("angular loss has finite gradients at parallel normals") {
    const TensorF a = TensorF::from({1, 3, 1, 1}, {0.0f, 0.0f, 1.0f}, true);
    ad::backward(angular_loss(a, normals({0, 0, 1}, 1)));
    for (float g : a.grad()) CHECK(std::isfinite(g));
  }

  TEST_CASE("parameter loss examples") {
    Rng rng(1);
    const SvbrdfMaps a = testing::random_maps(rng, 8, 8);
    CHECK(parameter_loss(a, a) < 1e-3);
    SvbrdfMaps b = a;
    for (auto& v : b.metallic.data) v = 0.0f;
    SvbrdfMaps c = b;
    for (auto& v : c.metallic.data) v = 1.0f;
    CHECK(parameter_loss(b, c) == doctest::Approx(0.25).epsilon(1e-3));
    const SvbrdfMaps d = testing::random_maps(rng, 8, 8);
    CHECK(parameter_loss(a, d) == doctest::Approx(parameter_loss(d, a)).epsilon(1e-6));
    CHECK(parameter_loss(tensor_of(a), tensor_of(d)).item() == doctest::Approx(parameter_loss(a, d)).epsilon(1e-5));
    CHECK_THROWS_AS(parameter_loss(a, testing::random_maps(rng, 4, 4)), ShapeError);
  }

  TEST_CASE("rendering loss is zero on identical maps and permutation invariant") {
    Rng rng(2);
    const SvbrdfMaps a = testing::random_maps(rng, 8, 8), b = testing::random_maps(rng, 8, 8);
    auto views = sample_loss_views(rng, 10);
    CHECK(rendering_loss(tensor_of(a), tensor_of(a), views).item() == 0.0f);
    const float l = rendering_loss(tensor_of(a), tensor_of(b), views).item();
    std::reverse(views.begin(), views.end());
    std::swap(views[2], views[7]);
    CHECK(rendering_loss(tensor_of(a), tensor_of(b), views).item() == doctest::Approx(l).epsilon(1e-6));
  }

  TEST_CASE("rendering loss sees roughness under a mirrored view") {
    Rng rng(3);
    const SvbrdfMaps a = SvbrdfMaps::uniform(16, 16, {0.5f, 0.5f, 0.5f}, {0, 0, 1}, 0.2f, 0.5f);
    const SvbrdfMaps b = SvbrdfMaps::uniform(16, 16, {0.5f, 0.5f, 0.5f}, {0, 0, 1}, 0.7f, 0.5f);
    auto views = sample_loss_views(rng, 2);
    REQUIRE(views[1].mirrored);
    const std::vector<LossView> mirrored{views[1]};
    CHECK(rendering_loss(tensor_of(a), tensor_of(b), mirrored).item() > 0.0f);
  }

  TEST_CASE("rendering loss gradient matches finite differences") {
    Rng rng(4);
    const int res = 16;
    const SceneConfig cfg;
    for (int trial = 0; trial < 3; ++trial) {
      const SvbrdfMaps fm = testing::random_maps(rng, res, res), rm = testing::random_maps(rng, res, res);
      const auto views = sample_loss_views(rng, 4, cfg);
      const TensorF fake = tensor_of(fm, true);
      ad::backward(rendering_loss(fake, tensor_of(rm), views, cfg));
      const std::vector<float> analytic(fake.grad().begin(), fake.grad().end());

      std::vector<double> f(fake.data().begin(), fake.data().end());
      const TensorF rt = tensor_of(rm);
      const std::vector<double> r(rt.data().begin(), rt.data().end());
      CHECK(rendering_loss_reference(f, r, res, views, cfg) ==
            doctest::Approx(rendering_loss(fake, rt, views, cfg).item()).epsilon(1e-4));

      ad::NoGradGuard guard;
      const double h = 1e-6;
      double worst = 0.0;
      for (int k = 0; k < 200; ++k) {
        const std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(f.size())));
        const double saved = f[i];
        f[i] = saved + h;
        const double up = rendering_loss_reference(f, r, res, views, cfg);
        f[i] = saved - h;
        const double down = rendering_loss_reference(f, r, res, views, cfg);
        f[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = 1.0 / (res * res);
        worst = std::max(worst, testing::rel_error(analytic[i], numeric, 1e-2 * scale));
      }
      CHECK(worst <= 1e-3);
    }
  }

  TEST_CASE("lsgan examples") {
    const TensorF ones = TensorF::full({1, 1, 4, 4}, 1.0f), zeros = TensorF::zeros({1, 1, 4, 4});
    const TensorF half = TensorF::full({1, 1, 4, 4}, 0.5f);
    CHECK(lsgan_d(ones, zeros).item() == 0.0f);
    CHECK(lsgan_d(half, half).item() == doctest::Approx(0.25));
    CHECK(lsgan_g(ones).item() == 0.0f);
    CHECK(lsgan_g(zeros).item() == doctest::Approx(0.5));
    const ScaleOutputs real{constant_output(1.0f, {0, 0, 0, 0}), constant_output(1.0f, {0, 0, 0, 0})};
    const ScaleOutputs fake{constant_output(0.5f, {0, 0, 0, 0}), constant_output(0.5f, {0, 0, 0, 0})};
    // Summed over both scales.
    CHECK(lsgan_d(real, fake).item() == doctest::Approx(2 * 0.125));
    CHECK(lsgan_g(fake).item() == doctest::Approx(2 * 0.125));
  }

  TEST_CASE("feature matching examples") {
    const ScaleOutputs a{constant_output(0, {1, 2, 3, 4}), constant_output(0, {1, 2, 3, 4})};
    CHECK(feature_matching(a, a).item() == 0.0f);
    const ScaleOutputs b{constant_output(0, {1, 2, 3 + 0.5f, 4}), constant_output(0, {1, 2, 3, 4})};
    CHECK(feature_matching(a, b).item() == doctest::Approx(0.25 / 8));
    CHECK(feature_matching(b, a).item() >= 0.0f);
    std::vector<std::vector<TensorF>> three(3), two(2);
    CHECK_THROWS_AS(feature_matching(three, two), ShapeError);
  }

  TEST_CASE("feature matching detaches the real branch on request") {
    TensorF real = TensorF::full({1, 1, 2, 2}, 1.0f, true);
    const TensorF fake = TensorF::zeros({1, 1, 2, 2}, true);
    const std::vector<std::vector<TensorF>> r{{real}}, f{{fake}};
    ad::backward(feature_matching(r, f, true));
    for (float g : real.grad()) CHECK(g == 0.0f);
    for (float g : fake.grad()) CHECK(g != 0.0f);
    real.zero_grad();
    ad::backward(feature_matching(r, f, false));
    for (float g : real.grad()) CHECK(g != 0.0f);
  }

  TEST_CASE("total loss examples") {
    LossReport unit;
    unit.l_a_g = unit.l_f = unit.l_p = unit.l_r = 1.0;
    CHECK(total_losses(unit, {}).total_g == doctest::Approx(1.0));
    LossWeights no_r;
    no_r.enable_r = false;
    CHECK(total_losses(unit, no_r).total_g == doctest::Approx(0.75));
    LossReport d;
    d.l_a_d = 0.25;
    d.l_f = 1.0;
    CHECK(total_losses(d, {}).total_d == doctest::Approx(0.26));
    LossWeights content_only;
    content_only.enable_a = content_only.enable_f = false;
    LossReport c;
    c.l_a_g = c.l_f = 5.0;
    c.l_p = 0.3;
    c.l_r = 0.5;
    CHECK(total_losses(c, content_only).total_g == doctest::Approx(0.2));
    const TensorF one = TensorF::scalar(1.0f);
    CHECK(total_generator_loss(one, one, one, one).item() == doctest::Approx(1.0));
    CHECK(total_generator_loss(one, TensorF{}, one, one).item() == doctest::Approx(0.75));
  }

  TEST_CASE("loss weight validation") {
    LossWeights w;
    w.n_render_views = 3;
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
    w.n_render_views = 10;
    w.lambda_f_disc = -1;
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
  }

  TEST_CASE("each enabled term reaches the generator") {
    Rng rng(5);
    const Generator g({0.125, 1}, rng);
    const MultiScaleDiscriminator disc({0.125, 11}, rng);
    const TensorF img = TensorF::from({1, 3, 64, 64}, testing::random_values<float>(rng, 3 * 64 * 64, 0, 1));
    const SvbrdfMaps truth = testing::random_maps(rng, 64, 64);
    const TensorF real = tensor_of(truth);
    const auto views = sample_loss_views(rng, 10);
    for (int term = 0; term < 4; ++term) {
      for (auto [name, t] : g.parameters()) t.zero_grad();
      const TensorF fake = g.forward(img);
      TensorF loss;
      if (term == 0) loss = parameter_loss(fake, real);
      if (term == 1) loss = rendering_loss(fake, real, views);
      if (term == 2) loss = lsgan_g(disc.discriminate(img, fake));
      if (term == 3) loss = feature_matching(disc.discriminate(img, real), disc.discriminate(img, fake));
      ad::backward(loss);
      int dead = 0;
      for (const auto& [name, t] : g.parameters()) {
        bool nonzero = false;
        for (float v : t.grad()) nonzero |= v != 0.0f;
        dead += nonzero ? 0 : 1;
      }
      INFO("term " << term);
      CHECK(dead == 0);
    }
  }
}
