// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "svbrdf/brdf_core.hpp"
#include "svbrdf/losses.hpp"
#include "svbrdf/networks.hpp"
#include "svbrdf/training.hpp"

namespace svbrdf {

// Root-mean-square errors per map. Normals use the angle between predicted
// and true normal divided by pi; diffuse and specular come from the metallic
// split of both parameter sets.
struct MapErrors {
  double base_color = 0.0;
  double normal = 0.0;
  double roughness = 0.0;
  double metallic = 0.0;
  double diffuse = 0.0;
  double specular = 0.0;
};

// Accumulates squared errors over many samples.
class ErrorAccumulator {
 public:
  void add(const SvbrdfMaps& pred, const SvbrdfMaps& truth);
  MapErrors rmse() const;
  std::size_t samples() const { return samples_; }

 private:
  std::array<double, 6> sum_{};
  std::array<double, 6> count_{};
  std::size_t samples_ = 0;
};

MapErrors map_rmse(const SvbrdfMaps& pred, const SvbrdfMaps& truth);

// 2x2 box downscale; normals are renormalized.
SvbrdfMaps downscale_half(const SvbrdfMaps& maps);

struct EvalReport {
  std::size_t samples = 0;
  MapErrors native;
  MapErrors half;
  double parameter_loss = 0.0;  // mean over samples
};

EvalReport evaluate_predictions(std::span<const SvbrdfMaps> predictions, std::span<const SvbrdfMaps> truths);
EvalReport evaluate(const Generator& generator, const SampleSet& test, int batch_size = 8);

// Held-out values of the four loss terms. The adversarial and feature terms
// are measured against a fixed judge discriminator.
struct HeldOutLosses {
  double l_p = 0.0;
  double l_r = 0.0;
  double l_a_g = 0.0;
  double l_f = 0.0;
};

HeldOutLosses held_out_losses(const Generator& generator, const MultiScaleDiscriminator& judge, const SampleSet& test,
                              const SceneConfig& scene, std::uint64_t seed, int n_views = 10, int batch_size = 8);

struct AblationRun {
  std::string name;
  LossWeights weights;
  EvalReport report;
  HeldOutLosses held_out;
  std::vector<LossReport> history;
};

// Rows: diffuse, specular, normal, roughness RMSE. Columns: the proposed
// model, then the runs without L_r, L_p, L_f and L_a. Percent worse is
// (proposed - ablated) / proposed * 100, so worse runs are negative.
struct AblationGrid {
  static constexpr std::array<const char*, 4> kRows = {"Diffuse", "Specular", "Normal", "Roughness"};
  static constexpr std::array<const char*, 5> kColumns = {"Proposed", "-L_r", "-L_p", "-L_f", "-L_a"};
  std::array<std::array<double, 5>, 4> error{};
  std::array<std::array<double, 4>, 4> percent_worse{};
  std::vector<AblationRun> runs;  // proposed first, then the four ablations
};

AblationGrid make_ablation_grid(std::vector<AblationRun> runs);

// Loss weights of the proposed model and of the four single-term ablations,
// in grid column order.
std::vector<std::pair<std::string, LossWeights>> ablation_settings(const LossWeights& base);

using RunCallback = std::function<void(const std::string& name)>;

// Trains the proposed configuration and every ablation from the same seed,
// evaluates each on the test set and assembles the grid. Each run writes its
// outputs to out_dir/<name>.
AblationGrid run_ablation(const TrainConfig& base, const SampleSet& train_set, const SampleSet& test_set,
                          const std::filesystem::path& out_dir, const RunCallback& on_start = {});

std::string format_grid(const AblationGrid& grid);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);
void write_ablation_report(const std::filesystem::path& path, const AblationGrid& grid);

}  // namespace svbrdf
