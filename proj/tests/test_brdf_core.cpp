// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "svbrdf/brdf_core.hpp"
#include "svbrdf/image.hpp"
#include "test_support.hpp"

using namespace svbrdf;

TEST_SUITE("brdf_core") {
  TEST_CASE("srgb transfer fixed points and midpoint") {
    CHECK(srgb_to_linear(0.0) == 0.0);
    CHECK(srgb_to_linear(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double expected = std::pow(0.555 / 1.055, 2.4);
    CHECK(srgb_to_linear(0.5) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(srgb_to_linear(0.5) - 0.2140) < 1e-4);
    CHECK(srgb_to_linear(0.02) == doctest::Approx(0.02 / 12.92));
  }

  TEST_CASE("srgb round trip and monotonicity") {
    double prev = -1.0;
    for (int i = 0; i <= 10000; ++i) {
      const double c = i / 10000.0;
      const double l = srgb_to_linear(c);
      CHECK(l > prev);
      prev = l;
      CHECK(std::abs(linear_to_srgb(l) - c) < 1e-6);
    }
  }

  TEST_CASE("srgb clamps out-of-range input with a diagnostic") {
    int count = 0;
    ScopedDiagnosticSink sink([&](const Diagnostic& d) {
      if (d.code == "clamp") ++count;
    });
    CHECK(srgb_to_linear(1.5) == doctest::Approx(1.0));
    CHECK(srgb_to_linear(-0.5) == 0.0);
    CHECK(count == 2);
  }

  TEST_CASE("metallic split closed forms") {
    const Vec3d b{0.8, 0.2, 0.1};
    auto r0 = split_metallic(b, 0.0);
    CHECK(r0.diffuse == b);
    for (int c = 0; c < 3; ++c) CHECK(r0.specular[c] == doctest::Approx(0.04));
    auto r1 = split_metallic(b, 1.0);
    for (int c = 0; c < 3; ++c) {
      CHECK(r1.diffuse[c] == 0.0);
      CHECK(r1.specular[c] == doctest::Approx(b[c]));
    }
    auto rh = split_metallic(Vec3d{0.5, 0.5, 0.5}, 0.5);
    for (int c = 0; c < 3; ++c) {
      CHECK(rh.diffuse[c] == doctest::Approx(0.25));
      CHECK(rh.specular[c] == doctest::Approx(0.27));
    }
  }

  TEST_CASE("metallic split is affine in base color and bounded") {
    Rng rng(7);
    for (int t = 0; t < 1000; ++t) {
      const double m = rng.uniform();
      const Vec3d a{rng.uniform(), rng.uniform(), rng.uniform()};
      const Vec3d b{rng.uniform(), rng.uniform(), rng.uniform()};
      const double w = rng.uniform();
      const auto mix = split_metallic(a * w + b * (1.0 - w), m);
      const auto sa = split_metallic(a, m), sb = split_metallic(b, m);
      for (int c = 0; c < 3; ++c) {
        CHECK(mix.diffuse[c] == doctest::Approx(w * sa.diffuse[c] + (1 - w) * sb.diffuse[c]).epsilon(1e-12));
        CHECK(mix.specular[c] == doctest::Approx(w * sa.specular[c] + (1 - w) * sb.specular[c]).epsilon(1e-12));
        CHECK(sa.diffuse[c] >= 0.0);
        CHECK(sa.diffuse[c] <= 1.0);
        CHECK(sa.specular[c] <= 1.0);
        CHECK(sa.specular[c] >= 0.04 * (1 - m) - 1e-15);
      }
    }
  }

  TEST_CASE("map-level split matches per-pixel formulas") {
    Rng rng(3);
    const SvbrdfMaps maps = testing::random_maps(rng, 4, 5);
    const DiffuseSpecularMaps ds = split_metallic(maps);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) {
        const float m = maps.metallic.at(0, y, x);
        for (int c = 0; c < 3; ++c) {
          const float b = maps.base_color.at(c, y, x);
          CHECK(ds.diffuse.at(c, y, x) == doctest::Approx(b * (1 - m)).epsilon(1e-6));
          CHECK(ds.specular.at(c, y, x) == doctest::Approx(0.04f * (1 - m) + b * m).epsilon(1e-6));
        }
      }
  }

  TEST_CASE("normal decoding examples") {
    CHECK(decode_normal(Vec3f{0.5f, 0.5f, 1.0f}) == Vec3f{0.0f, 0.0f, 1.0f});
    const Vec3f x = decode_normal(Vec3f{1.0f, 0.5f, 0.5f});
    CHECK(x.x == doctest::Approx(1.0f));
    CHECK(x.y == doctest::Approx(0.0f));
    CHECK(x.z == doctest::Approx(0.0f));
    CHECK(decode_normal(Vec3f{0.5f, 0.5f, 0.5f}) == Vec3f{0.0f, 0.0f, 1.0f});
    const Vec3f flipped = decode_normal(Vec3f{0.5f, 0.5f, 0.0f});
    CHECK(flipped.z == doctest::Approx(1.0f));
  }

  TEST_CASE("normal codec round trip on 8-bit storage") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
      const Vec3d n = testing::random_unit_upper(rng, 0.1);
      const Vec3f enc = encode_normal(Vec3f(n));
      const Vec3f q{dequantize8(quantize8(enc.x)), dequantize8(quantize8(enc.y)), dequantize8(quantize8(enc.z))};
      const Vec3f dec = decode_normal(q);
      CHECK(std::abs(length(dec) - 1.0f) < 1e-5f);
      const Vec3f re = encode_normal(dec);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(re[c] - q[c]) < 1.0f / 255.0f);
    }
  }

  TEST_CASE("validate rejects broken maps") {
    SvbrdfMaps m = SvbrdfMaps::uniform(4, 4, {0.5f, 0.5f, 0.5f}, {0, 0, 1}, 0.5f, 0.0f);
    CHECK_NOTHROW(validate(m));
    SvbrdfMaps bad = m;
    bad.roughness.at(0, 1, 1) = 1.5f;
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = m;
    bad.normal.at(2, 0, 0) = 0.5f;
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = m;
    bad.base_color.at(0, 0, 0) = std::nanf("");
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = m;
    bad.metallic = Image(1, 3, 4);
    CHECK_THROWS(validate(bad));
  }

  TEST_CASE("material directory round trips") {
    Rng rng(5);
    const SvbrdfMaps m = testing::random_maps(rng, 8, 8);
    const auto dir = testing::scratch_dir("material");
    save_material_pfm(dir / "pfm", m);
    const SvbrdfMaps back = load_material(dir / "pfm");
    CHECK(back.base_color.data == m.base_color.data);
    CHECK(back.normal.data == m.normal.data);
    CHECK(back.roughness.data == m.roughness.data);
    save_material(dir / "png", m);
    const SvbrdfMaps p = load_material(dir / "png");
    for (std::size_t i = 0; i < m.base_color.data.size(); ++i) {
      CHECK(std::abs(p.base_color.data[i] - m.base_color.data[i]) < 0.01f);
    }
    for (std::size_t i = 0; i < m.roughness.data.size(); ++i) {
      CHECK(std::abs(p.roughness.data[i] - m.roughness.data[i]) <= 0.5f / 255.0f + 1e-6f);
    }
    CHECK_THROWS_AS(load_material(dir / "missing"), IoError);
  }

  TEST_CASE("pfm round trip is exact") {
    Rng rng(9);
    Image img(3, 5, 7);
    for (float& v : img.data) v = static_cast<float>(rng.uniform(0.0, 10.0));
    const auto dir = testing::scratch_dir("pfm");
    write_pfm(dir / "a.pfm", img);
    const Image back = read_pfm(dir / "a.pfm");
    CHECK(back.same_shape(img));
    CHECK(back.data == img.data);
  }
}
