// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "svbrdf/shading.hpp"

namespace svbrdf {

namespace fs = std::filesystem;

bool adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient sizes differ");
  for (float g : grads)
    if (!std::isfinite(g)) return false;
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0f);
    state.v.assign(params.size(), 0.0f);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const float step_size = static_cast<float>(lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(cfg.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0f - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0f - b2) * g * g;
    params[i] -= step_size * state.m[i] / (std::sqrt(state.v[i]) * inv_sqrt_bc2 + eps);
  }
  return true;
}

Adam::Adam(NamedTensors params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg), state_(params_.size()) {}

bool Adam::step(double lr) {
  for (const auto& [name, t] : params_) {
    for (float g : t.grad()) {
      if (!std::isfinite(g)) {
        report_diagnostic("nan-gradient", "non-finite gradient in '" + name + "'; update skipped");
        return false;
      }
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::TensorF t = params_[i].second;
    adam_step(t.mutable_data(), t.grad(), state_[i], lr, cfg_);
  }
  ++steps_;
  return true;
}

void Adam::zero_grad() {
  for (auto& [name, t] : params_) {
    ad::TensorF h = t;
    h.zero_grad();
  }
}

void TrainConfig::validate() const {
  if (epochs < 1 || steps_per_epoch < 1 || batch_size < 1) {
    throw InvalidArgument("epochs, steps_per_epoch and batch_size must be positive");
  }
  if (!(lr0 > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("invalid optimizer settings");
  }
  if (!(width_scale > 0.0)) throw InvalidArgument("width_scale must be positive");
  if (resolution < 64 || resolution % 32 != 0) {
    throw InvalidArgument("resolution must be a multiple of 32 and at least 64");
  }
  loss.validate();
  scene.validate();
}

TrainConfig toy_train_config() {
  TrainConfig c;
  c.epochs = 20;
  c.steps_per_epoch = 200;
  c.batch_size = 4;
  c.width_scale = 0.125;
  c.resolution = 64;
  return c;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw InvalidArgument("epoch outside the schedule");
  const int half = cfg.epochs / 2;
  if (epoch < half || cfg.epochs - half == 0) return cfg.lr0;
  return cfg.lr0 * static_cast<double>(cfg.epochs - epoch) / static_cast<double>(cfg.epochs - half);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw UsageError("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw UsageError("invalid boolean '" + value + "' for " + key);
}

}  // namespace

void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "epochs") cfg.epochs = parse_number<int>(key, value);
  else if (key == "steps_per_epoch") cfg.steps_per_epoch = parse_number<int>(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value);
  else if (key == "lr0") cfg.lr0 = parse_number<double>(key, value);
  else if (key == "beta1") cfg.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") cfg.beta2 = parse_number<double>(key, value);
  else if (key == "width_scale") cfg.width_scale = parse_number<double>(key, value);
  else if (key == "resolution") cfg.resolution = parse_number<int>(key, value);
  else if (key == "residual_blocks") cfg.residual_blocks = parse_number<int>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "enable_r") cfg.loss.enable_r = parse_bool(key, value);
  else if (key == "enable_p") cfg.loss.enable_p = parse_bool(key, value);
  else if (key == "enable_a") cfg.loss.enable_a = parse_bool(key, value);
  else if (key == "enable_f") cfg.loss.enable_f = parse_bool(key, value);
  else if (key == "lambda_f_disc") cfg.loss.lambda_f_disc = parse_number<double>(key, value);
  else if (key == "n_render_views") cfg.loss.n_render_views = parse_number<int>(key, value);
  else if (key == "patch_size_m") cfg.scene.patch_size_m = parse_number<double>(key, value);
  else if (key == "camera_height_m") cfg.scene.camera_height_m = parse_number<double>(key, value);
  else if (key == "fov_deg") cfg.scene.fov_deg = parse_number<double>(key, value);
  else throw UsageError("unknown config key '" + key + "'");
}

TrainConfig read_train_config(const fs::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

SampleSet SampleSet::load(const DatasetManifest& manifest, Split split) {
  SampleSet set;
  std::map<std::string, std::size_t> by_dir;
  for (const auto& rec : manifest.records) {
    if (rec.split != split) continue;
    auto it = by_dir.find(rec.material_dir);
    if (it == by_dir.end()) {
      SvbrdfMaps maps = load_material(manifest.root / rec.material_dir);
      if (set.resolution_ == 0) set.resolution_ = maps.height();
      if (maps.height() != set.resolution_ || maps.width() != set.resolution_) {
        throw ShapeError("dataset samples differ in resolution");
      }
      set.packed_.push_back(pack_maps(maps));
      set.maps_.push_back(std::move(maps));
      it = by_dir.emplace(rec.material_dir, set.maps_.size() - 1).first;
    }
    const Image img = read_png(manifest.root / rec.input_path);
    if (img.channels != 3 || img.height != set.resolution_ || img.width != set.resolution_) {
      throw ShapeError("input image " + rec.input_path + " does not match the material resolution");
    }
    std::vector<unsigned char> bytes(img.data.size());
    std::transform(img.data.begin(), img.data.end(), bytes.begin(), quantize8);
    set.inputs_.push_back(std::move(bytes));
    set.map_index_.push_back(it->second);
  }
  return set;
}

ad::TensorF SampleSet::images(std::span<const std::size_t> indices) const {
  const std::size_t n = static_cast<std::size_t>(3) * resolution_ * resolution_;
  std::vector<float> data;
  data.reserve(indices.size() * n);
  for (std::size_t i : indices) {
    for (unsigned char b : inputs_.at(i)) data.push_back(dequantize8(b));
  }
  return ad::TensorF::from({static_cast<int>(indices.size()), 3, resolution_, resolution_}, std::move(data));
}

ad::TensorF SampleSet::targets(std::span<const std::size_t> indices) const {
  std::vector<float> data;
  for (std::size_t i : indices) {
    const auto& p = packed_[map_index_.at(i)];
    data.insert(data.end(), p.begin(), p.end());
  }
  return ad::TensorF::from({static_cast<int>(indices.size()), kNumParams, resolution_, resolution_},
                           std::move(data));
}

LdrImage SampleSet::image(std::size_t index) const {
  LdrImage img(3, resolution_, resolution_);
  const auto& bytes = inputs_.at(index);
  std::transform(bytes.begin(), bytes.end(), img.data.begin(), dequantize8);
  return img;
}

Models make_models(const TrainConfig& cfg) {
  Rng rng(Rng::mix_seed(cfg.seed, 0x6E7u));
  Rng g_rng = rng.fork(1), d_rng = rng.fork(2);
  return {Generator({cfg.width_scale, cfg.residual_blocks}, g_rng),
          MultiScaleDiscriminator({cfg.width_scale, 3 + kNumParams}, d_rng)};
}

void save_models(const Models& models, const fs::path& dir) {
  fs::create_directories(dir);
  save_checkpoint(dir / "generator.ckpt", models.generator.parameters());
  save_checkpoint(dir / "disc1.ckpt", models.discriminator.d1().parameters());
  save_checkpoint(dir / "disc2.ckpt", models.discriminator.d2().parameters());
}

void load_generator(Generator& g, const fs::path& checkpoint) { load_checkpoint_into(checkpoint, g.parameters()); }

namespace {

void set_requires_grad(const NamedTensors& params, bool on) {
  for (const auto& [name, t] : params) {
    ad::TensorF h = t;
    h.set_requires_grad(on);
  }
}

double value_or_zero(const ad::TensorF& t) { return t.defined() ? static_cast<double>(t.item()) : 0.0; }

void write_csv_row(std::FILE* f, long step, const LossReport& r) {
  std::fprintf(f, "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", step, r.l_p, r.l_r, r.l_a_g, r.l_a_d, r.l_f,
               r.total_g, r.total_d);
  std::fflush(f);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const SampleSet& data, Models& models, const fs::path& out_dir,
                  const StepCallback& callback) {
  cfg.validate();
  if (data.size() == 0) throw InvalidArgument("training set is empty");
  if (data.resolution() != cfg.resolution) {
    throw InvalidArgument("dataset resolution " + std::to_string(data.resolution()) +
                          " does not match the configured resolution " + std::to_string(cfg.resolution));
  }
  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "generator_init.ckpt", models.generator.parameters());

  const LossWeights& w = cfg.loss;
  const bool use_disc = w.enable_a || w.enable_f;
  const AdamConfig adam_cfg{cfg.beta1, cfg.beta2, 1e-8};
  Adam g_opt(models.generator.parameters(), adam_cfg);
  const NamedTensors d_params = models.discriminator.parameters();
  Adam d_opt(d_params, adam_cfg);

  TrainResult result;
  result.csv_path = out_dir / "loss.csv";
  std::FILE* csv = std::fopen(result.csv_path.c_str(), "w");
  if (!csv) throw IoError("cannot write " + result.csv_path.string());
  std::fprintf(csv, "step,l_p,l_r,l_a_g,l_a_d,l_f,total_g,total_d\n");

  Rng batch_rng(Rng::mix_seed(cfg.seed, 0xBA7Cu));
  Rng view_rng(Rng::mix_seed(cfg.seed, 0x7E3Du));
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
  try {
    for (long step = 0; step < cfg.total_steps(); ++step) {
      const int epoch = static_cast<int>(step / cfg.steps_per_epoch);
      const double lr = lr_schedule(epoch, cfg);
      for (auto& i : idx) i = static_cast<std::size_t>(batch_rng.uniform_int(static_cast<int>(data.size())));
      const ad::TensorF x = data.images(idx);
      const ad::TensorF p = data.targets(idx);
      const auto views = sample_loss_views(view_rng, w.n_render_views, cfg.scene);

      LossReport rep;
      const ad::TensorF fake = models.generator.forward(x);

      // Discriminator update on the current prediction.
      if (use_disc) {
        set_requires_grad(d_params, true);
        const ad::TensorF fake_const = fake.detach();
        const auto real_out = models.discriminator.discriminate(x, p);
        const auto fake_out = models.discriminator.discriminate(x, fake_const);
        const ad::TensorF l_a_d = lsgan_d(real_out, fake_out);
        const ad::TensorF l_f_d = feature_matching(real_out, fake_out, false);
        ad::TensorF total_d;
        if (w.enable_a) total_d = l_a_d;
        if (w.enable_f) {
          const ad::TensorF term = ad::scale(l_f_d, static_cast<float>(w.lambda_f_disc));
          total_d = total_d.defined() ? ad::add(total_d, term) : term;
        }
        rep.l_a_d = l_a_d.item();
        rep.total_d = total_d.item();
        d_opt.zero_grad();
        ad::backward(total_d);
        d_opt.step(lr);
        set_requires_grad(d_params, false);
      }

      // Generator update against the refreshed discriminator.
      ad::TensorF l_a_g, l_f;
      if (use_disc) {
        ScaleOutputs real_out;
        {
          ad::NoGradGuard guard;
          real_out = models.discriminator.discriminate(x, p);
        }
        const auto fake_out = models.discriminator.discriminate(x, fake);
        l_a_g = lsgan_g(fake_out);
        l_f = feature_matching(real_out, fake_out, true);
      }
      ad::TensorF l_p, l_r;
      if (w.enable_p) {
        l_p = parameter_loss(fake, p);
      } else {
        ad::NoGradGuard guard;
        l_p = parameter_loss(fake.detach(), p);
      }
      if (w.enable_r) {
        l_r = rendering_loss(fake, p, views, cfg.scene);
      } else {
        ad::NoGradGuard guard;
        l_r = rendering_loss(fake.detach(), p, views, cfg.scene);
      }
      const ad::TensorF total_g = total_generator_loss(w.enable_a ? l_a_g : ad::TensorF(),
                                                       w.enable_f ? l_f : ad::TensorF(),
                                                       w.enable_p ? l_p : ad::TensorF(),
                                                       w.enable_r ? l_r : ad::TensorF());
      rep.l_p = value_or_zero(l_p);
      rep.l_r = value_or_zero(l_r);
      rep.l_a_g = value_or_zero(l_a_g);
      rep.l_f = value_or_zero(l_f);
      rep.total_g = total_g.item();
      if (!std::isfinite(rep.total_g)) {
        throw Error("training diverged at step " + std::to_string(step) + ": generator loss is not finite");
      }
      g_opt.zero_grad();
      ad::backward(total_g);
      g_opt.step(lr);

      write_csv_row(csv, step, rep);
      result.history.push_back(rep);
      if ((step + 1) % cfg.steps_per_epoch == 0) save_models(models, out_dir);
      if (callback && !callback(step, rep)) break;
    }
  } catch (...) {
    set_requires_grad(d_params, true);
    std::fclose(csv);
    throw;
  }
  set_requires_grad(d_params, true);
  std::fclose(csv);
  save_models(models, out_dir);
  return result;
}

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest, const fs::path& out_dir) {
  const SampleSet data = SampleSet::load(manifest, Split::kTrain);
  Models models = make_models(cfg);
  return train(cfg, data, models, out_dir);
}

void project_parameters(std::span<float> params, int batch, int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (params.size() != static_cast<std::size_t>(batch) * kNumParams * plane) {
    throw ShapeError("project_parameters: buffer size mismatch");
  }
  for (int b = 0; b < batch; ++b) {
    float* p = params.data() + static_cast<std::size_t>(b) * kNumParams * plane;
    for (int c : {kBaseR, kBaseG, kBaseB, kRoughness, kMetallic}) {
      for (std::size_t i = 0; i < plane; ++i) p[c * plane + i] = std::clamp(p[c * plane + i], 0.0f, 1.0f);
    }
    for (std::size_t i = 0; i < plane; ++i) {
      Vec3f n{p[kNormalX * plane + i], p[kNormalY * plane + i], std::max(p[kNormalZ * plane + i], 1e-3f)};
      n = normalize(n);
      p[kNormalX * plane + i] = n.x;
      p[kNormalY * plane + i] = n.y;
      p[kNormalZ * plane + i] = n.z;
    }
  }
}

FitResult fit_inverse(const HdrImage& observation, const SvbrdfMaps& init, const FitConfig& cfg) {
  cfg.scene.validate();
  if (observation.channels != 3 || observation.height != init.height() || observation.width != init.width()) {
    throw ShapeError("observation does not match the initial maps");
  }
  if (cfg.ground_truth && (cfg.ground_truth->height() != init.height() || cfg.ground_truth->width() != init.width())) {
    throw ShapeError("ground truth does not match the initial maps");
  }
  const int h = init.height(), w = init.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  // Normals get their own optimizer so that they can start late and move slower.
  const ad::TensorF packed_init = maps_to_tensor(std::span(&init, 1));
  std::vector<float> packed(packed_init.data().begin(), packed_init.data().end());
  auto unpack = [&](int c0, int c1) {
    return std::vector<float>(packed.begin() + c0 * plane, packed.begin() + c1 * plane);
  };
  std::vector<float> mat = unpack(kBaseR, kNormalX);
  const std::vector<float> rm = unpack(kRoughness, kNumParams);
  mat.insert(mat.end(), rm.begin(), rm.end());
  ad::TensorF material = ad::TensorF::from({1, 5, h, w}, std::move(mat), true);
  ad::TensorF normals = ad::TensorF::from({1, 3, h, w}, unpack(kNormalX, kRoughness), true);
  auto assemble = [&] {
    return ad::concat_channels<float>(
        {ad::slice_channels(material, 0, 3), normals, ad::slice_channels(material, 3, 5)});
  };
  auto project = [&] {
    const auto m = material.data();
    const auto n = normals.data();
    std::copy(m.begin(), m.begin() + 3 * plane, packed.begin());
    std::copy(n.begin(), n.end(), packed.begin() + kNormalX * plane);
    std::copy(m.begin() + 3 * plane, m.end(), packed.begin() + kRoughness * plane);
    project_parameters(packed, 1, h, w);
    auto md = material.mutable_data();
    auto nd = normals.mutable_data();
    std::copy(packed.begin(), packed.begin() + 3 * plane, md.begin());
    std::copy(packed.begin() + kNormalX * plane, packed.begin() + kRoughness * plane, nd.begin());
    std::copy(packed.begin() + kRoughness * plane, packed.end(), md.begin() + 3 * plane);
  };

  ad::TensorF target_log;
  {
    ad::NoGradGuard guard;
    target_log = ad::log1p(ad::TensorF::from({1, 3, h, w}, observation.data));
  }
  ad::TensorF gt;
  if (cfg.ground_truth) gt = maps_to_tensor(std::span(&*cfg.ground_truth, 1));
  const LossView flash = flash_view(cfg.scene);
  const AdamConfig adam{0.9, 0.999, 1e-8};
  Adam material_opt({{"material", material}}, adam);
  Adam normal_opt({{"normals", normals}}, adam);
  const int normal_start = static_cast<int>(std::lround(cfg.normal_warmup * cfg.steps));
  Rng rng(Rng::mix_seed(cfg.seed, 0xF17u));
  FitResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    const ad::TensorF params = assemble();
    ad::TensorF loss = mae(ad::log1p(render(params, flash, cfg.scene)), target_log);
    if (gt.defined() && cfg.n_views > 0) {
      const auto views = sample_loss_views(rng, cfg.n_views, cfg.scene);
      loss = ad::add(loss, rendering_loss(params, gt, views, cfg.scene));
    }
    result.losses.push_back(loss.item());
    material_opt.zero_grad();
    normal_opt.zero_grad();
    ad::backward(loss);
    const double lr = 0.5 * cfg.lr * (1.0 + std::cos(kPi<double> * step / cfg.steps));
    material_opt.step(lr);
    if (step >= normal_start) normal_opt.step(lr * cfg.normal_lr_scale);
    project();
  }
  const ad::TensorF params = assemble();
  result.maps = tensor_to_maps(params);
  return result;
}

}  // namespace svbrdf
