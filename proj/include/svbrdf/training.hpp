// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svbrdf/checkpoint.hpp"
#include "svbrdf/datagen.hpp"
#include "svbrdf/diff_render.hpp"
#include "svbrdf/losses.hpp"
#include "svbrdf/networks.hpp"

namespace svbrdf {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment buffers for one parameter tensor.
struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  long step = 0;
};

// One bias-corrected Adam update in place. Returns false without touching
// anything when a gradient is not finite.
bool adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

class Adam {
 public:
  Adam(NamedTensors params, AdamConfig cfg = {});

  // Applies one update to every parameter. A non-finite gradient aborts the
  // whole step with a diagnostic and returns false.
  bool step(double lr);
  void zero_grad();
  long steps() const { return steps_; }
  const NamedTensors& parameters() const { return params_; }

 private:
  NamedTensors params_;
  AdamConfig cfg_;
  std::vector<AdamState> state_;
  long steps_ = 0;
};

struct TrainConfig {
  int epochs = 200;
  int steps_per_epoch = 5000;
  int batch_size = 8;
  double lr0 = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double width_scale = 1.0;
  int resolution = 512;
  int residual_blocks = 9;
  LossWeights loss;
  std::uint64_t seed = 0;
  SceneConfig scene;

  void validate() const;
  long total_steps() const { return static_cast<long>(epochs) * steps_per_epoch; }
};

// Small-scale defaults: 64x64, width 0.125, batch 4.
TrainConfig toy_train_config();

// Full-rate learning rate for the first half of the epochs, then linear decay
// that reaches zero at the end of the last epoch.
double lr_schedule(int epoch, const TrainConfig& cfg);

// Flat "key = value" text, '#' comments. Keys mirror TrainConfig fields;
// unknown keys throw UsageError.
void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
TrainConfig read_train_config(const std::filesystem::path& path, TrainConfig base = {});

// Samples of one split held in memory: 8-bit inputs and decoded maps.
class SampleSet {
 public:
  SampleSet() = default;
  static SampleSet load(const DatasetManifest& manifest, Split split);

  std::size_t size() const { return inputs_.size(); }
  std::size_t material_count() const { return maps_.size(); }
  int resolution() const { return resolution_; }

  // (B, 3, H, W) inputs and (B, 8, H, W) target parameters.
  ad::TensorF images(std::span<const std::size_t> indices) const;
  ad::TensorF targets(std::span<const std::size_t> indices) const;
  LdrImage image(std::size_t index) const;
  const SvbrdfMaps& maps(std::size_t index) const { return maps_[map_index_[index]]; }

 private:
  int resolution_ = 0;
  std::vector<std::vector<unsigned char>> inputs_;
  std::vector<std::size_t> map_index_;
  std::vector<SvbrdfMaps> maps_;
  std::vector<std::vector<float>> packed_;
};

struct TrainResult {
  std::vector<LossReport> history;
  std::filesystem::path csv_path;
};

// Everything a training run owns; kept so callers can evaluate afterwards.
struct Models {
  Generator generator;
  MultiScaleDiscriminator discriminator;
};

Models make_models(const TrainConfig& cfg);

// Called after every step with (step, report); return false to stop early.
using StepCallback = std::function<bool(long, const LossReport&)>;

// Adversarial training: per step one discriminator update followed by one
// generator update. Writes loss.csv, generator_init.ckpt and per-epoch
// generator.ckpt, disc1.ckpt and disc2.ckpt into out_dir.
TrainResult train(const TrainConfig& cfg, const SampleSet& train_set, Models& models,
                  const std::filesystem::path& out_dir, const StepCallback& callback = {});
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest, const std::filesystem::path& out_dir);

void save_models(const Models& models, const std::filesystem::path& dir);
void load_generator(Generator& g, const std::filesystem::path& checkpoint);

struct FitConfig {
  int steps = 500;
  // Peak learning rate; it follows a half cosine down to zero.
  double lr = 0.02;
  // Normals stay fixed for this fraction of the steps, then use a scaled rate.
  double normal_warmup = 0.1;
  double normal_lr_scale = 0.25;
  int n_views = 10;
  std::uint64_t seed = 0;
  SceneConfig scene;
  // When set, re-renderings of these maps under sampled views are matched
  // as well as the flash observation.
  std::optional<SvbrdfMaps> ground_truth;
};

struct FitResult {
  SvbrdfMaps maps;
  std::vector<double> losses;
};

// Per-pixel optimization of the maps against a linear flash observation
// rendered with cfg.scene. Maps are projected back to valid ranges after
// every step.
FitResult fit_inverse(const HdrImage& observation, const SvbrdfMaps& init, const FitConfig& cfg);

// Clamp to [0,1] and renormalize normals to the upper hemisphere, in place on
// a (B, 8, H, W) buffer.
void project_parameters(std::span<float> params, int batch, int height, int width);

}  // namespace svbrdf
