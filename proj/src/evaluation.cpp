// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace svbrdf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Slot { kSlotBase, kSlotNormal, kSlotRough, kSlotMetal, kSlotDiffuse, kSlotSpecular };

double squared_diff(const Image& a, const Image& b, double& count) {
  if (!a.same_shape(b)) throw ShapeError("prediction and ground truth differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  count += static_cast<double>(a.data.size());
  return s;
}

}  // namespace

void ErrorAccumulator::add(const SvbrdfMaps& pred, const SvbrdfMaps& truth) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw ShapeError("prediction and ground truth differ in resolution");
  }
  sum_[kSlotBase] += squared_diff(pred.base_color, truth.base_color, count_[kSlotBase]);
  sum_[kSlotRough] += squared_diff(pred.roughness, truth.roughness, count_[kSlotRough]);
  sum_[kSlotMetal] += squared_diff(pred.metallic, truth.metallic, count_[kSlotMetal]);
  const std::size_t plane = pred.base_color.pixels();
  for (std::size_t i = 0; i < plane; ++i) {
    const Vec3d a{pred.normal.data[i], pred.normal.data[plane + i], pred.normal.data[2 * plane + i]};
    const Vec3d b{truth.normal.data[i], truth.normal.data[plane + i], truth.normal.data[2 * plane + i]};
    const double la = length(a), lb = length(b);
    const double c = la > 0.0 && lb > 0.0 ? std::clamp(dot(a, b) / (la * lb), -1.0, 1.0) : 1.0;
    const double angle = std::acos(c) / kPi<double>;
    sum_[kSlotNormal] += angle * angle;
  }
  count_[kSlotNormal] += static_cast<double>(plane);
  const DiffuseSpecularMaps sp = split_metallic(pred), st = split_metallic(truth);
  sum_[kSlotDiffuse] += squared_diff(sp.diffuse, st.diffuse, count_[kSlotDiffuse]);
  sum_[kSlotSpecular] += squared_diff(sp.specular, st.specular, count_[kSlotSpecular]);
  ++samples_;
}

MapErrors ErrorAccumulator::rmse() const {
  auto r = [this](int slot) { return count_[slot] > 0.0 ? std::sqrt(sum_[slot] / count_[slot]) : 0.0; };
  return {r(kSlotBase), r(kSlotNormal), r(kSlotRough), r(kSlotMetal), r(kSlotDiffuse), r(kSlotSpecular)};
}

MapErrors map_rmse(const SvbrdfMaps& pred, const SvbrdfMaps& truth) {
  ErrorAccumulator acc;
  acc.add(pred, truth);
  return acc.rmse();
}

SvbrdfMaps downscale_half(const SvbrdfMaps& maps) {
  const int h = maps.height(), w = maps.width();
  if (h % 2 || w % 2) throw ShapeError("downscale_half needs even dimensions");
  auto half = [](const Image& img) {
    Image out(img.channels, img.height / 2, img.width / 2);
    for (int c = 0; c < img.channels; ++c)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          out.at(c, y, x) = 0.25f * (img.at(c, 2 * y, 2 * x) + img.at(c, 2 * y, 2 * x + 1) +
                                     img.at(c, 2 * y + 1, 2 * x) + img.at(c, 2 * y + 1, 2 * x + 1));
        }
    return out;
  };
  SvbrdfMaps out;
  out.base_color = half(maps.base_color);
  out.normal = half(maps.normal);
  out.roughness = half(maps.roughness);
  out.metallic = half(maps.metallic);
  const std::size_t plane = out.normal.pixels();
  for (std::size_t i = 0; i < plane; ++i) {
    Vec3f n{out.normal.data[i], out.normal.data[plane + i], out.normal.data[2 * plane + i]};
    n = length(n) > 0.0f ? normalize(n) : Vec3f{0.0f, 0.0f, 1.0f};
    out.normal.data[i] = n.x;
    out.normal.data[plane + i] = n.y;
    out.normal.data[2 * plane + i] = n.z;
  }
  return out;
}

EvalReport evaluate_predictions(std::span<const SvbrdfMaps> predictions, std::span<const SvbrdfMaps> truths) {
  if (predictions.size() != truths.size()) throw ShapeError("prediction and ground truth counts differ");
  ErrorAccumulator native, half;
  double lp = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    native.add(predictions[i], truths[i]);
    half.add(downscale_half(predictions[i]), downscale_half(truths[i]));
    lp += parameter_loss(predictions[i], truths[i]);
  }
  EvalReport r;
  r.samples = predictions.size();
  r.native = native.rmse();
  r.half = half.rmse();
  r.parameter_loss = predictions.empty() ? 0.0 : lp / static_cast<double>(predictions.size());
  return r;
}

EvalReport evaluate(const Generator& generator, const SampleSet& test, int batch_size) {
  if (test.size() == 0) throw InvalidArgument("test set is empty");
  ad::NoGradGuard guard;
  std::vector<SvbrdfMaps> preds, truths;
  for (std::size_t start = 0; start < test.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(test.size(), start + batch_size); ++i) idx.push_back(i);
    const ad::TensorF out = generator.forward(test.images(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      preds.push_back(tensor_to_maps(out, static_cast<int>(k)));
      truths.push_back(test.maps(idx[k]));
    }
  }
  return evaluate_predictions(preds, truths);
}

HeldOutLosses held_out_losses(const Generator& generator, const MultiScaleDiscriminator& judge, const SampleSet& test,
                              const SceneConfig& scene, std::uint64_t seed, int n_views, int batch_size) {
  if (test.size() == 0) throw InvalidArgument("test set is empty");
  ad::NoGradGuard guard;
  Rng view_rng(Rng::mix_seed(seed, 0x4E1Du));
  HeldOutLosses sum;
  double weight = 0.0;
  for (std::size_t start = 0; start < test.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(test.size(), start + batch_size); ++i) idx.push_back(i);
    const ad::TensorF x = test.images(idx);
    const ad::TensorF p = test.targets(idx);
    const ad::TensorF fake = generator.forward(x);
    const auto views = sample_loss_views(view_rng, n_views, scene);
    const auto real_out = judge.discriminate(x, p);
    const auto fake_out = judge.discriminate(x, fake);
    const double n = static_cast<double>(idx.size());
    sum.l_p += n * parameter_loss(fake, p).item();
    sum.l_r += n * rendering_loss(fake, p, views, scene).item();
    sum.l_a_g += n * lsgan_g(fake_out).item();
    sum.l_f += n * feature_matching(real_out, fake_out).item();
    weight += n;
  }
  return {sum.l_p / weight, sum.l_r / weight, sum.l_a_g / weight, sum.l_f / weight};
}

std::vector<std::pair<std::string, LossWeights>> ablation_settings(const LossWeights& base) {
  LossWeights all = base;
  all.enable_r = all.enable_p = all.enable_a = all.enable_f = true;
  std::vector<std::pair<std::string, LossWeights>> out = {{"proposed", all}};
  LossWeights w = all;
  w.enable_r = false;
  out.emplace_back("no_r", w);
  w = all;
  w.enable_p = false;
  out.emplace_back("no_p", w);
  w = all;
  w.enable_f = false;
  out.emplace_back("no_f", w);
  w = all;
  w.enable_a = false;
  out.emplace_back("no_a", w);
  return out;
}

AblationGrid make_ablation_grid(std::vector<AblationRun> runs) {
  if (runs.size() != 5) throw InvalidArgument("ablation grid needs the proposed run and four ablations");
  AblationGrid g;
  for (int c = 0; c < 5; ++c) {
    const MapErrors& e = runs[c].report.native;
    g.error[0][c] = e.diffuse;
    g.error[1][c] = e.specular;
    g.error[2][c] = e.normal;
    g.error[3][c] = e.roughness;
  }
  for (int r = 0; r < 4; ++r)
    for (int c = 1; c < 5; ++c) {
      const double base = g.error[r][0];
      g.percent_worse[r][c - 1] = base > 0.0 ? (base - g.error[r][c]) / base * 100.0 : 0.0;
    }
  g.runs = std::move(runs);
  return g;
}

AblationGrid run_ablation(const TrainConfig& base, const SampleSet& train_set, const SampleSet& test_set,
                          const fs::path& out_dir, const RunCallback& on_start) {
  std::vector<AblationRun> runs;
  std::vector<Models> models;
  for (const auto& [name, weights] : ablation_settings(base.loss)) {
    if (on_start) on_start(name);
    TrainConfig cfg = base;
    cfg.loss = weights;
    models.push_back(make_models(cfg));
    AblationRun run;
    run.name = name;
    run.weights = weights;
    run.history = train(cfg, train_set, models.back(), out_dir / name).history;
    run.report = evaluate(models.back().generator, test_set);
    runs.push_back(std::move(run));
  }
  // The proposed run's discriminators judge every generator.
  const MultiScaleDiscriminator& judge = models.front().discriminator;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].held_out = held_out_losses(models[i].generator, judge, test_set, base.scene, base.seed,
                                       base.loss.n_render_views);
  }
  return make_ablation_grid(std::move(runs));
}

std::string format_grid(const AblationGrid& g) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s | %-9s | %-9s %-8s | %-9s %-8s | %-9s %-8s | %-9s %-8s\n", "Map", "Proposed",
                "-L_r", "% worse", "-L_p", "% worse", "-L_f", "% worse", "-L_a", "% worse");
  out += buf;
  for (int r = 0; r < 4; ++r) {
    std::snprintf(buf, sizeof buf, "%-10s | %-9.4f | %-9.4f %-8.2f | %-9.4f %-8.2f | %-9.4f %-8.2f | %-9.4f %-8.2f\n",
                  AblationGrid::kRows[r], g.error[r][0], g.error[r][1], g.percent_worse[r][0], g.error[r][2],
                  g.percent_worse[r][1], g.error[r][3], g.percent_worse[r][2], g.error[r][4], g.percent_worse[r][3]);
    out += buf;
  }
  return out;
}

namespace {

json errors_json(const MapErrors& e) {
  return {{"base_color", e.base_color}, {"normal", e.normal},   {"roughness", e.roughness},
          {"metallic", e.metallic},     {"diffuse", e.diffuse}, {"specular", e.specular}};
}

json report_json(const EvalReport& r) {
  return {{"samples", r.samples},
          {"rmse", errors_json(r.native)},
          {"rmse_half_resolution", errors_json(r.half)},
          {"parameter_loss", r.parameter_loss}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_eval_report(const fs::path& path, const EvalReport& report) { write_json(path, report_json(report)); }

void write_ablation_report(const fs::path& path, const AblationGrid& g) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = {{"map", AblationGrid::kRows[r]}, {"proposed", g.error[r][0]}};
    for (int c = 1; c < 5; ++c) {
      row[AblationGrid::kColumns[c]] = g.error[r][c];
      row[std::string(AblationGrid::kColumns[c]) + " % worse"] = g.percent_worse[r][c - 1];
    }
    rows.push_back(row);
  }
  json runs = json::array();
  for (const auto& run : g.runs) {
    runs.push_back({{"name", run.name},
                    {"report", report_json(run.report)},
                    {"held_out",
                     {{"l_p", run.held_out.l_p},
                      {"l_r", run.held_out.l_r},
                      {"l_a_g", run.held_out.l_a_g},
                      {"l_f", run.held_out.l_f}}}});
  }
  write_json(path, {{"grid", rows}, {"runs", runs}});
}

}  // namespace svbrdf
