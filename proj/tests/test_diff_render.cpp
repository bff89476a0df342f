// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "gradient_cases.hpp"
#include "svbrdf/diff_render.hpp"
#include "test_support.hpp"

using namespace svbrdf;

namespace {

SvbrdfMaps uniform_maps(int res, Vec3f base, float rough, float metal) {
  return SvbrdfMaps::uniform(res, res, base, {0.0f, 0.0f, 1.0f}, rough, metal);
}

double channel_mean(const Image& img, int c) {
  double s = 0.0;
  for (float v : img.plane(c)) s += v;
  return s / static_cast<double>(img.pixels());
}

}  // namespace

TEST_SUITE("diff_render") {
  TEST_CASE("flash render of a uniform plane is symmetric") {
    const SvbrdfMaps maps = uniform_maps(32, {0.6f, 0.5f, 0.4f}, 0.4f, 0.3f);
    const HdrImage img = render_flash(maps);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const float v = img.at(c, y, x);
          CHECK(std::abs(v - img.at(c, 31 - y, x)) <= 1e-5f * v);
          CHECK(std::abs(v - img.at(c, y, 31 - x)) <= 1e-5f * v);
          CHECK(std::abs(v - img.at(c, x, y)) <= 1e-5f * v);
        }
  }

  TEST_CASE("flash render is linear in intensity") {
    Rng rng(1);
    const SvbrdfMaps maps = testing::random_maps(rng, 16, 16);
    SceneConfig cfg;
    const HdrImage a = render_flash(maps, cfg);
    cfg.flash_intensity = cfg.flash_intensity * 2.0;
    const HdrImage b = render_flash(maps, cfg);
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(b.data[i] == doctest::Approx(2.0f * a.data[i]));
  }

  TEST_CASE("black dielectric shows only the specular highlight under the flash") {
    const SvbrdfMaps maps = uniform_maps(32, {0, 0, 0}, 0.3f, 0.0f);
    const HdrImage img = render_flash(maps);
    int by = 0, bx = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (img.at(0, y, x) > img.at(0, by, bx)) {
          by = y;
          bx = x;
        }
    CHECK((by == 15 || by == 16));
    CHECK((bx == 15 || bx == 16));
    // Only the 4% Fresnel term contributes, so channels are identical.
    for (std::size_t i = 0; i < img.pixels(); ++i) CHECK(img.data[i] == img.data[img.pixels() + i]);
    const SvbrdfMaps gray = uniform_maps(32, {0.5f, 0.5f, 0.5f}, 0.3f, 0.0f);
    CHECK(render_flash(gray).at(0, 0, 0) > img.at(0, 0, 0));
  }

  TEST_CASE("collocated point light reproduces the flash render") {
    Rng rng(2);
    const SvbrdfMaps maps = testing::random_maps(rng, 16, 16);
    const SceneConfig cfg;
    const HdrImage flash = render_flash(maps, cfg);
    const HdrImage point = render_point_light(maps, {cfg.flash_position(), cfg.flash_color()}, cfg.flash_position(), cfg);
    for (std::size_t i = 0; i < flash.data.size(); ++i) CHECK(std::abs(flash.data[i] - point.data[i]) <= 1e-6f);
  }

  TEST_CASE("light color acts per channel") {
    Rng rng(3);
    const SvbrdfMaps maps = testing::random_maps(rng, 8, 8);
    const Vec3d view{0.05, 0.02, 0.5};
    const HdrImage red = render_point_light(maps, {{0.1, 0.1, 0.4}, {1, 0, 0}}, view);
    for (float v : red.plane(1)) CHECK(v == 0.0f);
    for (float v : red.plane(2)) CHECK(v == 0.0f);
    const HdrImage white = render_point_light(maps, {{0.1, 0.1, 0.4}, {1, 1, 1}}, view);
    const HdrImage mixed = render_point_light(maps, {{0.1, 0.1, 0.4}, {0.3, 1.7, 0.9}}, view);
    const double k[3] = {0.3, 1.7, 0.9};
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < white.pixels(); ++i)
        CHECK(mixed.plane(c)[i] == doctest::Approx(k[c] * white.plane(c)[i]).epsilon(1e-6));
  }

  TEST_CASE("mirror light position maximizes the specular response") {
    // Odd size puts a pixel center at the mirror point.
    const SvbrdfMaps maps = uniform_maps(17, {0, 0, 0}, 0.3f, 0.0f);
    const double r = 0.6, theta = 0.6;
    const Vec3d view{r * std::sin(theta), 0.0, r * std::cos(theta)};
    int best = -1;
    double best_mean = -1.0;
    const int n = 50;
    int mirror_index = -1;
    for (int i = 0; i < n; ++i) {
      const double phi = 2.0 * kPi<double> * i / n;
      if (i == n / 2) mirror_index = i;
      const Vec3d light{r * std::sin(theta) * std::cos(phi), r * std::sin(theta) * std::sin(phi), r * std::cos(theta)};
      const double m = channel_mean(render_point_light(maps, {light, {1, 1, 1}}, view), 0);
      if (m > best_mean) {
        best_mean = m;
        best = i;
      }
    }
    CHECK(best == mirror_index);
  }

  TEST_CASE("loss view sampling") {
    const SceneConfig cfg;
    Rng a(5), b(5);
    const auto va = sample_loss_views(a, 10, cfg), vb = sample_loss_views(b, 10, cfg);
    REQUIRE(va.size() == 10);
    for (std::size_t i = 0; i < va.size(); ++i) {
      CHECK(va[i].light.position == vb[i].light.position);
      CHECK(va[i].view_pos == vb[i].view_pos);
      CHECK(va[i].light.color == vb[i].light.color);
    }
    Rng rng(6);
    for (int t = 0; t < 200; ++t) {
      const auto views = sample_loss_views(rng, 10, cfg);
      for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& v = views[i];
        CHECK(v.light.position.z > 0.0);
        CHECK(v.view_pos.z > 0.0);
        for (int c = 0; c < 3; ++c) {
          CHECK(v.light.color[c] >= 0.5);
          CHECK(v.light.color[c] <= 1.5);
        }
        CHECK(v.mirrored == (i >= 5));
        if (v.mirrored) {
          const Vec3d l = normalize(v.light.position - v.surface_point);
          const Vec3d o = normalize(v.view_pos - v.surface_point);
          const Vec3d refl = reflect(l, Vec3d{0, 0, 1});
          CHECK(length(refl - o) <= 1e-6);
          CHECK(std::abs(v.surface_point.x) <= 0.5 * cfg.patch_size_m);
          CHECK(std::abs(v.surface_point.y) <= 0.5 * cfg.patch_size_m);
        } else {
          CHECK(length(v.light.position) == doctest::Approx(2.0 * cfg.patch_size_m));
        }
      }
    }
    CHECK_THROWS_AS(sample_loss_views(rng, 3, cfg), InvalidArgument);
  }

  TEST_CASE("log tonemap") {
    HdrImage img(Image(1, 1, 3));
    img.data = {0.0f, static_cast<float>(std::exp(1.0) - 1.0), 5.0f};
    const HdrImage out = log_tonemap(img);
    CHECK(out.data[0] == 0.0f);
    CHECK(out.data[1] == doctest::Approx(1.0f));
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
      float x1 = static_cast<float>(rng.uniform(0.0, 100.0)), x2 = static_cast<float>(rng.uniform(0.0, 100.0));
      if (x1 == x2) continue;
      if (x1 > x2) std::swap(x1, x2);
      HdrImage p(Image(1, 1, 2));
      p.data = {x1, x2};
      const HdrImage q = log_tonemap(p);
      CHECK(q.data[0] < q.data[1]);
    }
    img.data[2] = -1.0f;
    CHECK_THROWS_AS(log_tonemap(img), InvalidArgument);
  }

  TEST_CASE("render VJP with zero cotangent is zero") {
    Rng rng(8);
    const SvbrdfMaps maps = testing::random_maps(rng, 8, 8);
    const LossView view = testing::random_view(rng, {});
    const SvbrdfMaps g = render_vjp(maps, view, HdrImage(Image(3, 8, 8)));
    for (float v : pack_maps(g)) CHECK(v == 0.0f);
    CHECK_THROWS_AS(render_vjp(maps, view, HdrImage(Image(3, 4, 8))), ShapeError);
  }

  TEST_CASE("metallic gradient of a uniform map") {
    const SceneConfig cfg;
    const SvbrdfMaps maps = uniform_maps(8, {0.7f, 0.4f, 0.2f}, 0.4f, 0.5f);
    const LossView view{{{0.1, -0.05, 0.4}, {1, 1, 1}}, {-0.05, 0.1, 0.5}, false, {}};
    HdrImage up(Image(3, 8, 8, 1.0f));
    const SvbrdfMaps g = render_vjp(maps, view, up, cfg);
    const std::vector<float> packed = pack_maps(maps);
    std::vector<double> p(packed.begin(), packed.end());
    ad::NoGradGuard guard;
    auto total = [&](double m) {
      for (int i = 0; i < 64; ++i) p[kMetallic * 64 + i] = m;
      const auto out = render<double>(ad::TensorD::from({1, 8, 8, 8}, p), view, cfg);
      double s = 0.0;
      for (double v : out.data()) s += v;
      return s;
    };
    const double h = 1e-4;
    const double numeric = (total(0.5 + h) - total(0.5 - h)) / (2 * h);
    double analytic = 0.0;
    for (float v : g.metallic.data) analytic += v;
    CHECK(testing::rel_error(analytic, numeric) <= 1e-3);
  }

  TEST_CASE("render VJP is local to each pixel") {
    Rng rng(9);
    const SvbrdfMaps maps = testing::random_maps(rng, 12, 12);
    const LossView view = testing::random_view(rng, {});
    HdrImage up(Image(3, 12, 12));
    up.at(1, 5, 7) = 1.0f;
    const SvbrdfMaps g = render_vjp(maps, view, up);
    const auto packed = pack_maps(g);
    int nonzero = 0;
    for (int k = 0; k < kNumParams; ++k)
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
          const float v = packed[(k * 12 + y) * 12 + x];
          if (y != 5 || x != 7) CHECK(v == 0.0f);
          else nonzero += v != 0.0f;
        }
    CHECK(nonzero > 0);
  }

  TEST_CASE("render VJP agrees with finite differences") {
    Rng rng(10);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) worst = std::max(worst, testing::render_vjp_error(rng, 16));
    MESSAGE("render VJP worst relative error " << worst);
    CHECK(worst <= 1e-3);
  }

  TEST_CASE("parallel renderer matches the serial reference") {
    Rng rng(11);
    const SvbrdfMaps maps = testing::random_maps(rng, 24, 20);
    const LossView view = testing::random_view(rng, {});
    const HdrImage a = render_point_light(maps, view.light, view.view_pos);
    const HdrImage b = reference::render_point_light(maps, view.light, view.view_pos);
    CHECK(a.data == b.data);
    HdrImage up(Image(3, 24, 20));
    for (float& v : up.data) v = static_cast<float>(rng.uniform(-1, 1));
    CHECK(pack_maps(render_vjp(maps, view, up)) == pack_maps(reference::render_vjp(maps, view, up)));
  }

  TEST_CASE("tensor render matches the map renderer and its VJP") {
    Rng rng(12);
    const SvbrdfMaps m0 = testing::random_maps(rng, 8, 8), m1 = testing::random_maps(rng, 8, 8);
    const std::vector<SvbrdfMaps> batch = {m0, m1};
    ad::TensorF params = maps_to_tensor(batch);
    params.set_requires_grad(true);
    const LossView view = testing::random_view(rng, {});
    const ad::TensorF out = render(params, view);
    CHECK(out.shape() == ad::Shape{2, 3, 8, 8});
    const HdrImage r1 = render_point_light(m1, view.light, view.view_pos);
    CHECK(std::equal(r1.data.begin(), r1.data.end(), out.data().begin() + 192));
    HdrImage up(Image(3, 8, 8));
    for (float& v : up.data) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<float> upv(384, 0.0f);
    std::copy(up.data.begin(), up.data.end(), upv.begin() + 192);
    ad::backward(ad::sum(ad::mul(out, ad::TensorF::from({2, 3, 8, 8}, upv))));
    const auto g1 = pack_maps(render_vjp(m1, view, up));
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(params.grad()[512 + i] == doctest::Approx(g1[i]));
    for (std::size_t i = 0; i < 512; ++i) CHECK(params.grad()[i] == 0.0f);
  }

  TEST_CASE("packing round trips") {
    Rng rng(13);
    const SvbrdfMaps m = testing::random_maps(rng, 5, 7);
    const SvbrdfMaps back = unpack_maps(pack_maps(m), 5, 7);
    CHECK(back.base_color.data == m.base_color.data);
    CHECK(back.normal.data == m.normal.data);
    CHECK(back.metallic.data == m.metallic.data);
    const std::vector<SvbrdfMaps> one = {m};
    CHECK(pack_maps(tensor_to_maps(maps_to_tensor(one))) == pack_maps(m));
  }

  TEST_CASE("scene with only point lights equals the point-light render") {
    Rng rng(14);
    const SvbrdfMaps maps = testing::random_maps(rng, 8, 8);
    const PointLight l1{{0.1, 0.0, 0.4}, {1, 0.5, 0.2}}, l2{{-0.2, 0.1, 0.3}, {0.3, 0.3, 1}};
    const Vec3d view{0, 0, 0.5};
    const std::vector<PointLight> lights = {l1, l2};
    const HdrImage s = render_scene(maps, lights, {}, view);
    const HdrImage a = render_point_light(maps, l1, view), b = render_point_light(maps, l2, view);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(s.data[i] == doctest::Approx(a.data[i] + b.data[i]));
  }

  TEST_CASE("scene configuration is validated") {
    SceneConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.fov_deg = 5.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = SceneConfig{};
    cfg.patch_size_m = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = SceneConfig{};
    cfg.patch_size_m = 2.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  }
}
