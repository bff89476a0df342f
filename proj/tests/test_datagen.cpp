// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "svbrdf/datagen.hpp"
#include "test_support.hpp"

using namespace svbrdf;

namespace {

std::pair<int, int> argmax_luminance(const Image& img) {
  int by = 0, bx = 0;
  double best = -1.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double l = img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x);
      if (l > best) {
        best = l;
        by = y;
        bx = x;
      }
    }
  return {by, bx};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetConfig small_config(std::uint64_t seed) {
  DatasetConfig cfg;
  cfg.n_materials = 10;
  cfg.seed = seed;
  cfg.source_resolution = 64;
  cfg.target_resolution = 32;
  return cfg;
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("recipe kind names round trip") {
    for (auto k : {RecipeKind::kChecker, RecipeKind::kFractalNoise, RecipeKind::kStripes, RecipeKind::kMetalFlakes,
                   RecipeKind::kBlend}) {
      CHECK(recipe_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS(recipe_kind_from_string("marble"));
  }

  TEST_CASE("synthesis is deterministic and valid for every kind") {
    for (auto k : {RecipeKind::kChecker, RecipeKind::kFractalNoise, RecipeKind::kStripes, RecipeKind::kMetalFlakes,
                   RecipeKind::kBlend}) {
      const MaterialRecipe r = random_recipe(17, k);
      CHECK(r.kind == k);
      const SvbrdfMaps a = synthesize_material(r, 64), b = synthesize_material(r, 64);
      CHECK(a.base_color.data == b.base_color.data);
      CHECK(a.normal.data == b.normal.data);
      CHECK(a.roughness.data == b.roughness.data);
      CHECK(a.metallic.data == b.metallic.data);
      CHECK_NOTHROW(validate(a, 1e-5f));
    }
    CHECK(synthesize_material(random_recipe(1), 32).base_color.data !=
          synthesize_material(random_recipe(2), 32).base_color.data);
  }

  TEST_CASE("flat height gives straight-up normals") {
    const Image n = normals_from_height(Image(1, 16, 16, 0.7f));
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        CHECK(n.at(0, y, x) == 0.0f);
        CHECK(n.at(1, y, x) == 0.0f);
        CHECK(n.at(2, y, x) == 1.0f);
      }
  }

  TEST_CASE("height ramp tilts normals against the slope") {
    Image h(1, 8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) h.at(0, y, x) = 0.5f * x;
    const Image n = normals_from_height(h);
    const double expect = -0.5 / std::sqrt(1.25);
    CHECK(n.at(0, 4, 4) == doctest::Approx(expect).epsilon(1e-5));
    CHECK(n.at(1, 4, 4) == doctest::Approx(0.0));
  }

  TEST_CASE("metal flakes mix metal and dielectric") {
    const SvbrdfMaps m = synthesize_material(random_recipe(5, RecipeKind::kMetalFlakes), 128);
    const auto [lo, hi] = std::minmax_element(m.metallic.data.begin(), m.metallic.data.end());
    CHECK(*lo < 0.1f);
    CHECK(*hi > 0.9f);
  }

  TEST_CASE("identity augmentation is a sub-image") {
    const SvbrdfMaps src = synthesize_material(random_recipe(3), 64);
    AugmentParams p;
    p.scale = 0.5;
    p.center_x = 24.0;
    p.center_y = 40.0;
    const SvbrdfMaps out = augment_one(src, p, 32);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) {
          CHECK(out.base_color.at(c, y, x) == doctest::Approx(src.base_color.at(c, y + 24, x + 8)).epsilon(1e-6));
          CHECK(out.normal.at(c, y, x) == doctest::Approx(src.normal.at(c, y + 24, x + 8)).epsilon(1e-5));
        }
        CHECK(out.roughness.at(0, y, x) == src.roughness.at(0, y + 24, x + 8));
      }
  }

  TEST_CASE("quarter turns rotate normals with the image") {
    Rng rng(4);
    const int n = 32;
    Image height(1, n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        height.at(0, y, x) = static_cast<float>(0.5 + 0.2 * std::sin(0.4 * x + 0.1 * y) * std::cos(0.3 * y));
    SvbrdfMaps src = SvbrdfMaps::uniform(n, n, {0.5f, 0.5f, 0.5f}, {0, 0, 1}, 0.5f, 0.0f);
    src.normal = normals_from_height(height);
    for (int c = 0; c < 3; ++c)
      std::copy(height.data.begin(), height.data.end(), src.base_color.data.begin() + c * n * n);
    for (int turns = 1; turns < 4; ++turns) {
      AugmentParams p;
      p.quarter_turns = turns;
      p.center_x = p.center_y = 0.5 * n;
      const SvbrdfMaps out = augment_one(src, p, n);
      Image rotated_height(1, n, n);
      std::copy(out.base_color.data.begin(), out.base_color.data.begin() + n * n, rotated_height.data.begin());
      const Image expect = normals_from_height(rotated_height);
      double worst = 0.0;
      for (int c = 0; c < 3; ++c)
        for (int y = 1; y < n - 1; ++y)
          for (int x = 1; x < n - 1; ++x)
            worst = std::max(worst, static_cast<double>(std::abs(out.normal.at(c, y, x) - expect.at(c, y, x))));
      INFO("quarter turns " << turns);
      CHECK(worst <= 1e-3);
      CHECK_NOTHROW(validate(out, 1e-5f));
    }
  }

  TEST_CASE("augment draws seven valid crops") {
    Rng rng(6);
    const SvbrdfMaps src = synthesize_material(random_recipe(6), 128);
    const auto crops = augment(src, rng, 7, 64);
    CHECK(crops.size() == 7);
    for (const auto& c : crops) {
      CHECK(c.maps.height() == 64);
      CHECK(c.params.quarter_turns >= 0);
      CHECK(c.params.quarter_turns < 4);
      CHECK(c.params.scale >= 0.5);
      CHECK(c.params.scale <= 1.0);
      const double half = 0.5 * c.params.scale * 128;
      CHECK(c.params.center_x - half >= 0.0);
      CHECK(c.params.center_x + half <= 128.0);
      CHECK_NOTHROW(validate(c.maps, 1e-5f));
    }
    CHECK_THROWS_AS(random_augment_params(rng, 32, 64), InvalidArgument);
  }

  TEST_CASE("analytic skies are normalized and distinct") {
    const EnvApprox a = analytic_sky(0), b = analytic_sky(1);
    CHECK(a.lights.size() == 16);
    double e = 0.0;
    for (const auto& l : a.lights) {
      CHECK(l.direction.z > 0.0);
      e += (0.2126 * l.irradiance.x + 0.7152 * l.irradiance.y + 0.0722 * l.irradiance.z) * l.direction.z;
    }
    CHECK(e == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(a.lights[0].direction.x != b.lights[0].direction.x);
  }

  TEST_CASE("equirect sampling finds the bright spot") {
    Image env(3, 32, 64, 0.01f);
    // Bright patch at theta ~ 45 degrees, phi ~ 90 degrees.
    for (int y = 7; y < 9; ++y)
      for (int x = 15; x < 17; ++x)
        for (int c = 0; c < 3; ++c) env.at(c, y, x) = 1000.0f;
    Rng rng(7);
    const EnvApprox s = sample_equirect(env, 16, rng);
    int near = 0;
    for (const auto& l : s.lights) {
      CHECK(l.direction.z > 0.0);
      if (std::abs(l.direction.x) < 0.2 && l.direction.y > 0.6 && l.direction.z > 0.6) ++near;
    }
    CHECK(near >= 12);
  }

  TEST_CASE("missing environment file falls back to an analytic sky") {
    Rng rng(8);
    const EnvApprox e = load_environment("/nonexistent/env.pfm", 3, 16, rng);
    const EnvApprox sky = analytic_sky(3, 16);
    REQUIRE(e.lights.size() == sky.lights.size());
    CHECK(e.lights[0].direction.x == sky.lights[0].direction.x);
  }

  TEST_CASE("rotation about z keeps elevation") {
    const EnvApprox a = analytic_sky(2);
    const EnvApprox r = rotate_about_z(a, 0.5 * kPi<double>);
    CHECK(r.lights[0].direction.z == doctest::Approx(a.lights[0].direction.z));
    CHECK(r.lights[0].direction.x == doctest::Approx(-a.lights[0].direction.y));
  }

  TEST_CASE("input rendering without environment is the exposed flash render") {
    Rng rng(9);
    const SvbrdfMaps m = testing::random_maps(rng, 32, 32);
    const SceneConfig cfg;
    RenderParams p;
    const LdrImage ldr = render_input(m, analytic_sky(0), cfg, p);
    const LdrImage ref = apply_auto_exposure(render_flash(m, cfg));
    CHECK(ldr.data == ref.data);
  }

  TEST_CASE("input rendering stays in range and sees off-axis light") {
    Rng rng(10);
    const SvbrdfMaps m = SvbrdfMaps::uniform(32, 32, {0.2f, 0.2f, 0.2f}, {0, 0, 1}, 0.25f, 0.0f);
    const SceneConfig cfg;
    for (int i = 0; i < 5; ++i) {
      const LdrImage img = render_input(m, analytic_sky(i), cfg, rng);
      for (float v : img.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
    const auto flash_peak = argmax_luminance(render_input(m, {}, cfg, RenderParams{}));
    EnvApprox bright;
    bright.lights.push_back({normalize(Vec3d{0.25, 0.0, 1.0}), {1.0, 1.0, 1.0}});
    RenderParams p;
    p.env_strength = 10.0;
    // The mirror reflection of the tilted light reaches the camera near x = 0.125 m.
    const auto env_peak = argmax_luminance(render_input(m, bright, cfg, p));
    CHECK(std::abs(flash_peak.second - 16) <= 1);
    CHECK(std::abs(flash_peak.first - 16) <= 1);
    CHECK(env_peak.second >= 26);
  }

  TEST_CASE("environment pools are disjoint") {
    for (int available : {2, 10, 26}) {
      const auto tr = environment_pool(Split::kTrain, available), te = environment_pool(Split::kTest, available);
      CHECK(!tr.empty());
      CHECK(!te.empty());
      CHECK(tr.size() + te.size() == static_cast<std::size_t>(available));
      for (int id : te) CHECK(std::find(tr.begin(), tr.end(), id) == tr.end());
    }
    CHECK(environment_pool(Split::kTest).size() == 6);
  }

  TEST_CASE("material split is eighty twenty") {
    const auto s = assign_splits(10, 0.8, 42);
    CHECK(std::count(s.begin(), s.end(), Split::kTrain) == 8);
    CHECK(assign_splits(10, 0.8, 42) == s);
    const auto t = assign_splits(200, 0.8, 1);
    CHECK(std::count(t.begin(), t.end(), Split::kTest) == 40);
  }

  TEST_CASE("dataset counts, leakage and determinism") {
    const auto dir_a = testing::scratch_dir("datagen_a"), dir_b = testing::scratch_dir("datagen_b");
    const DatasetManifest a = build_dataset(small_config(11), dir_a);
    const DatasetManifest b = build_dataset(small_config(11), dir_b);
    const auto train_ids = a.material_ids(Split::kTrain), test_ids = a.material_ids(Split::kTest);
    CHECK(train_ids.size() == 8);
    CHECK(test_ids.size() == 2);
    CHECK(a.count(Split::kTrain) == 8 * 7 * 3);
    CHECK(a.count(Split::kTest) == 2 * 7 * 1);
    for (const auto& id : test_ids) CHECK(std::find(train_ids.begin(), train_ids.end(), id) == train_ids.end());

    const auto test_pool = environment_pool(Split::kTest);
    for (const auto& r : a.records) {
      const bool in_test_pool = std::find(test_pool.begin(), test_pool.end(), r.render.env_id) != test_pool.end();
      CHECK(in_test_pool == (r.split == Split::kTest));
      CHECK(std::filesystem::exists(dir_a / r.input_path));
      CHECK(std::filesystem::exists(dir_a / r.material_dir / "basecolor.png"));
    }
    CHECK(read_file(dir_a / kManifestName) == read_file(dir_b / kManifestName));
    CHECK(read_file(dir_a / a.records[5].input_path) == read_file(dir_b / b.records[5].input_path));

    const DatasetManifest c = read_manifest(dir_a / kManifestName);
    REQUIRE(c.records.size() == a.records.size());
    CHECK(c.records[3].material_id == a.records[3].material_id);
    CHECK(c.records[3].augment.center_x == a.records[3].augment.center_x);
    CHECK(c.records[3].render.flash_strength == a.records[3].render.flash_strength);
    CHECK(c.records[3].recipe.kind == a.records[3].recipe.kind);

    const auto dir_c = testing::scratch_dir("datagen_c");
    const DatasetManifest d = build_dataset(small_config(12), dir_c);
    CHECK(read_file(dir_c / kManifestName) != read_file(dir_a / kManifestName));
  }

  TEST_CASE("dataset configuration errors") {
    DatasetConfig cfg = small_config(1);
    cfg.target_resolution = 128;
    CHECK_THROWS_AS(build_dataset(cfg, testing::scratch_dir("datagen_err")), InvalidArgument);
    CHECK_THROWS_AS(read_manifest("/nonexistent/manifest.jsonl"), IoError);
  }
}
