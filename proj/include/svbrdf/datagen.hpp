// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svbrdf/brdf_core.hpp"
#include "svbrdf/common.hpp"
#include "svbrdf/diff_render.hpp"
#include "svbrdf/exposure.hpp"
#include "svbrdf/image.hpp"

namespace svbrdf {

enum class RecipeKind { kChecker, kFractalNoise, kStripes, kMetalFlakes, kBlend };

std::string to_string(RecipeKind kind);
RecipeKind recipe_kind_from_string(const std::string& name);

// Seeded description of a procedural material. Every pixel interpolates
// between two phases (a, b) according to a kind-specific mask; the height
// field that drives the normals follows the same mask.
struct MaterialRecipe {
  RecipeKind kind = RecipeKind::kFractalNoise;
  std::uint64_t seed = 0;
  Vec3d color_a{0.5, 0.5, 0.5};
  Vec3d color_b{0.5, 0.5, 0.5};
  double roughness_a = 0.5;
  double roughness_b = 0.5;
  double metallic_a = 0.0;
  double metallic_b = 0.0;
  double feature_scale = 0.125;   // feature size as a fraction of the image side
  double height_amplitude = 2.0;  // in pixels of height per unit mask
  double orientation = 0.0;       // radians, for stripes
  double color_jitter = 0.05;     // amplitude of fine color noise
  RecipeKind blend_a = RecipeKind::kChecker;
  RecipeKind blend_b = RecipeKind::kStripes;
};

// Draws a recipe with parameters from normal distributions clipped to valid
// ranges. Kinds cycle with the seed unless one is forced.
MaterialRecipe random_recipe(std::uint64_t seed, std::optional<RecipeKind> kind = std::nullopt);

// Deterministic synthesis at the given square resolution.
SvbrdfMaps synthesize_material(const MaterialRecipe& recipe, int resolution = 1024);

// Unit normals from a height field (pixel units, row 0 at the top) using
// central differences: n = normalize(-dh/dx, -dh/dy, 1) with y pointing up.
Image normals_from_height(const Image& height);

struct AugmentParams {
  int quarter_turns = 0;     // 0..3
  double angle_deg = 0.0;    // free rotation added to the quarter turns
  double scale = 1.0;        // crop side as a fraction of the source side
  double center_x = 0.0;     // crop center in source pixel coordinates
  double center_y = 0.0;
};

// Samples one crop: the output pixel grid is rotated and scaled into the
// source; samples outside the source are mirrored back in. Normal x/y are
// rotated with the spatial transform.
SvbrdfMaps augment_one(const SvbrdfMaps& source, const AugmentParams& params, int target);

// Random crop parameters that keep the axis-aligned crop inside the source.
AugmentParams random_augment_params(Rng& rng, int source, int target, double min_scale = 0.5,
                                    double max_scale = 1.0);

struct AugmentedSample {
  SvbrdfMaps maps;
  AugmentParams params;
};

std::vector<AugmentedSample> augment(const SvbrdfMaps& source, Rng& rng, int count = 7, int target = 512);

// Distant-light approximation of an environment map.
struct EnvApprox {
  int id = -1;
  std::vector<DirectionalLight> lights;
};

// Procedural sky (sun plus dome) identified by `id`; total irradiance on an
// upward-facing surface is normalized to 1.
EnvApprox analytic_sky(int id, int count = 16);

// Importance-samples `count` directions of the upper hemisphere of an
// equirectangular RGB map (row 0 = zenith) proportional to luminance times
// solid angle.
EnvApprox sample_equirect(const Image& equirect, int count, Rng& rng);

// Reads an equirectangular PFM; falls back to analytic_sky(id) with a
// diagnostic when the file cannot be read.
EnvApprox load_environment(const std::filesystem::path& path, int id, int count, Rng& rng);

EnvApprox rotate_about_z(const EnvApprox& env, double angle_rad);

struct RenderParams {
  int env_id = -1;
  double env_rotation_deg = 0.0;
  double env_strength = 0.0;  // env irradiance relative to the flash at the patch center
  double flash_strength = 1.0;
  Vec3d color_temp_scale{1.0, 1.0, 1.0};
};

// Random flash strength, color temperature, env rotation and strength.
RenderParams random_render_params(Rng& rng, int env_id);

// Flash plus environment lights, auto-exposed to [0,1].
LdrImage render_input(const SvbrdfMaps& maps, const EnvApprox& env, const SceneConfig& cfg,
                      const RenderParams& params, const ExposureParams& exposure = {});
// Draws RenderParams from `rng` and records them in `params_out` if given.
LdrImage render_input(const SvbrdfMaps& maps, const EnvApprox& env, const SceneConfig& cfg, Rng& rng,
                      RenderParams* params_out = nullptr);

enum class Split { kTrain, kTest };
std::string to_string(Split split);

struct SampleRecord {
  std::string material_id;
  MaterialRecipe recipe;
  Split split = Split::kTrain;
  int aug_index = 0;
  AugmentParams augment;
  int input_index = 0;
  RenderParams render;
  // Relative to the dataset root.
  std::string input_path;
  std::string material_dir;
};

struct DatasetConfig {
  int n_materials = 10;
  std::uint64_t seed = 0;
  int source_resolution = 128;
  int target_resolution = 64;
  int crops_per_material = 7;
  int train_env_draws = 3;
  int test_env_draws = 1;
  double train_fraction = 0.8;
  int env_lights = 16;
  std::filesystem::path env_dir;  // empty: analytic skies
  SceneConfig scene;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<SampleRecord> records;

  std::vector<std::string> material_ids(Split split) const;
  std::size_t count(Split split) const;
};

// Environment ids reserved for each split; the pools are disjoint.
std::vector<int> environment_pool(Split split, int available = 26);

// Material-level split decided before any augmentation.
std::vector<Split> assign_splits(int n_materials, double train_fraction, std::uint64_t seed);

DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

inline constexpr const char* kManifestName = "manifest.jsonl";

}  // namespace svbrdf
