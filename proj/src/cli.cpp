// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "svbrdf/datagen.hpp"
#include "svbrdf/diff_render.hpp"
#include "svbrdf/evaluation.hpp"
#include "svbrdf/exposure.hpp"
#include "svbrdf/training.hpp"

namespace svbrdf::cli {

namespace fs = std::filesystem;

namespace {

Vec3d parse_vec3(const std::string& text, const std::string& flag) {
  std::array<double, 3> v{};
  std::stringstream ss(text);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw UsageError(flag + " expects x,y,z");
    try {
      std::size_t used = 0;
      v[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError(flag + " expects x,y,z, got '" + text + "'");
    }
    ++i;
  }
  if (i != 3) throw UsageError(flag + " expects x,y,z, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

void print_error(std::ostream& err, const std::string& kind, const std::string& command, const std::string& msg) {
  err << "svbrdf: error kind=" << kind << " command=" << (command.empty() ? "-" : command)
      << " message=\"" << one_line(msg) << "\"" << std::endl;
}

bool is_pfm(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".pfm";
}

HdrImage read_hdr(const fs::path& path) {
  Image img = read_pfm(path);
  if (img.channels != 3) throw InvalidArgument(path.string() + " must have 3 channels");
  return HdrImage(std::move(img));
}

SvbrdfMaps gray_material(int h, int w) {
  SvbrdfMaps m(h, w);
  std::fill(m.base_color.data.begin(), m.base_color.data.end(), 0.5f);
  std::fill(m.roughness.data.begin(), m.roughness.data.end(), 0.5f);
  return m;
}

// Every subcommand registers into this holder; values land here before the
// selected handler runs.
struct Options {
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_value() const { return seed.value_or(0); }

  // generate-dataset
  DatasetConfig dataset;

  // render / expose / fit / predict
  fs::path material;
  fs::path in;
  fs::path out;
  std::string light;
  std::string view;
  std::string light_color = "1,1,1";
  fs::path checkpoint;
  fs::path ground_truth;
  fs::path init;
  int fit_steps = 500;
  double fit_lr = 0.02;
  int fit_views = 10;

  // train / eval
  fs::path dataset_dir;
  fs::path config;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> disable;
  bool ablation = false;

  // shared scene geometry
  std::optional<double> patch_size;
  std::optional<double> camera_height;
  std::optional<double> fov;
};

SceneConfig scene_from(const Options& o) {
  SceneConfig s;
  if (o.patch_size) s.patch_size_m = *o.patch_size;
  if (o.camera_height) s.camera_height_m = *o.camera_height;
  if (o.fov) s.fov_deg = *o.fov;
  s.validate();
  return s;
}

void add_scene_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--patch-size", o.patch_size, "Physical patch side in meters");
  cmd->add_option("--camera-height", o.camera_height, "Camera and flash height in meters");
  cmd->add_option("--fov", o.fov, "Camera field of view in degrees");
}

void add_seed(CLI::App* cmd, Options& o) { cmd->add_option("--seed", o.seed, "Random seed (default 0)"); }

TrainConfig train_config_from(const Options& o) {
  TrainConfig cfg = toy_train_config();
  if (!o.config.empty()) cfg = read_train_config(o.config, cfg);
  for (const auto& [key, value] : o.overrides) apply_config_value(cfg, key, value);
  for (const auto& term : o.disable) {
    if (term == "r") cfg.loss.enable_r = false;
    else if (term == "p") cfg.loss.enable_p = false;
    else if (term == "a") cfg.loss.enable_a = false;
    else if (term == "f") cfg.loss.enable_f = false;
    else throw UsageError("--disable accepts r, p, a, f; got '" + term + "'");
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.patch_size) cfg.scene.patch_size_m = *o.patch_size;
  if (o.camera_height) cfg.scene.camera_height_m = *o.camera_height;
  if (o.fov) cfg.scene.fov_deg = *o.fov;
  cfg.validate();
  return cfg;
}

// Train flags map onto config keys so that they override file values.
void add_train_flags(CLI::App* cmd, Options& o) {
  static const std::array<std::pair<const char*, const char*>, 8> kFlags = {{
      {"--epochs", "epochs"},
      {"--steps-per-epoch", "steps_per_epoch"},
      {"--batch-size", "batch_size"},
      {"--lr", "lr0"},
      {"--width-scale", "width_scale"},
      {"--resolution", "resolution"},
      {"--residual-blocks", "residual_blocks"},
      {"--render-views", "n_render_views"},
  }};
  for (const auto& [flag, key] : kFlags) {
    const std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&o, k](const std::string& v) { o.overrides[k] = v; }, "Overrides config key " + k);
  }
  cmd->add_option("--config", o.config, "Flat key = value training config file")->check(CLI::ExistingFile);
  cmd->add_option("--disable", o.disable, "Loss terms to disable: r, p, a, f")->delimiter(',');
}

int cmd_generate(const Options& o, std::ostream& out) {
  DatasetConfig cfg = o.dataset;
  cfg.seed = o.seed_value();
  cfg.scene = scene_from(o);
  const DatasetManifest m = build_dataset(cfg, o.out);
  out << "wrote " << m.records.size() << " samples (" << m.count(Split::kTrain) << " train, "
      << m.count(Split::kTest) << " test) to " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_render(const Options& o, std::ostream& out) {
  const SceneConfig scene = scene_from(o);
  const SvbrdfMaps maps = load_material(o.material);
  PointLight light;
  light.position = o.light.empty() ? scene.flash_position() : parse_vec3(o.light, "--light");
  light.color = parse_vec3(o.light_color, "--light-color");
  const Vec3d view = o.view.empty() ? scene.flash_position() : parse_vec3(o.view, "--view");
  const HdrImage img = render_point_light(maps, light, view, scene);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  write_pfm(o.out, img);
  out << "wrote " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_expose(const Options& o, std::ostream& out) {
  const HdrImage img = read_hdr(o.in);
  const LdrImage ldr = apply_auto_exposure(img);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  write_png(o.out, ldr);
  char buf[128];
  std::snprintf(buf, sizeof buf, "average luminance %.6g, EV100 %.4f", average_luminance(img),
                ev100_from_luminance(average_luminance(img)));
  out << buf << "\n";
  return kExitOk;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const HdrImage obs = read_hdr(o.in);
  FitConfig cfg;
  cfg.steps = o.fit_steps;
  cfg.lr = o.fit_lr;
  cfg.n_views = o.fit_views;
  cfg.seed = o.seed_value();
  cfg.scene = scene_from(o);
  if (!o.ground_truth.empty()) cfg.ground_truth = load_material(o.ground_truth);
  const SvbrdfMaps init = o.init.empty() ? gray_material(obs.height, obs.width) : load_material(o.init);
  const FitResult r = fit_inverse(obs, init, cfg);
  fs::create_directories(o.out);
  save_material(o.out, r.maps);
  std::ofstream csv(o.out / "fit_loss.csv");
  csv << "step,loss\n";
  for (std::size_t i = 0; i < r.losses.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, r.losses[i]);
    csv << buf;
  }
  if (!csv) throw IoError("failed writing fit_loss.csv");
  out << "final loss " << (r.losses.empty() ? 0.0 : r.losses.back()) << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const TrainConfig cfg = train_config_from(o);
  const DatasetManifest manifest = read_manifest(o.dataset_dir);
  const SampleSet data = SampleSet::load(manifest, Split::kTrain);
  if (data.resolution() != cfg.resolution) {
    throw InvalidArgument("dataset resolution " + std::to_string(data.resolution()) +
                          " does not match training resolution " + std::to_string(cfg.resolution));
  }
  Models models = make_models(cfg);
  const TrainResult r = train(cfg, data, models, o.out);
  out << "trained " << r.history.size() << " steps; losses in " << r.csv_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const DatasetManifest manifest = read_manifest(o.dataset_dir);
  const SampleSet test = SampleSet::load(manifest, Split::kTest);
  if (o.ablation) {
    const TrainConfig cfg = train_config_from(o);
    const SampleSet train_set = SampleSet::load(manifest, Split::kTrain);
    const AblationGrid grid =
        run_ablation(cfg, train_set, test, o.out, [&out](const std::string& name) { out << "run " << name << "\n"; });
    write_ablation_report(o.out / "ablation.json", grid);
    const std::string table = format_grid(grid);
    std::ofstream(o.out / "ablation.txt") << table;
    write_eval_report(o.out / "eval.json", grid.runs.front().report);
    out << table;
    return kExitOk;
  }
  if (o.checkpoint.empty()) throw UsageError("eval needs --checkpoint unless --ablation is given");
  const NamedTensors saved = load_checkpoint(o.checkpoint);
  Rng rng(o.seed_value());
  Generator g(infer_generator_spec(saved), rng);
  load_checkpoint_into(o.checkpoint, g.parameters());
  const EvalReport report = evaluate(g, test);
  write_eval_report(o.out / "eval.json", report);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "samples %zu  base_color %.4f  normal %.4f  roughness %.4f  metallic %.4f  diffuse %.4f  "
                "specular %.4f\n",
                report.samples, report.native.base_color, report.native.normal, report.native.roughness,
                report.native.metallic, report.native.diffuse, report.native.specular);
  out << buf;
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
  Image input;
  if (is_pfm(o.in)) {
    input = apply_auto_exposure(read_hdr(o.in));
  } else {
    input = read_png(o.in);
  }
  if (input.channels != 3) throw InvalidArgument("input image must have 3 channels");
  const NamedTensors saved = load_checkpoint(o.checkpoint);
  Rng rng(o.seed_value());
  Generator g(infer_generator_spec(saved), rng);
  load_checkpoint_into(o.checkpoint, g.parameters());
  ad::NoGradGuard guard;
  const ad::TensorF x = ad::TensorF::from({1, 3, input.height, input.width}, input.data);
  const SvbrdfMaps maps = tensor_to_maps(g.forward(x));
  save_material(o.out, maps);
  out << "wrote maps to " << o.out.string() << "\n";
  return kExitOk;
}

}  // namespace

GeneratorSpec infer_generator_spec(const NamedTensors& checkpoint) {
  std::map<std::string, ad::Shape> shapes;
  for (const auto& [name, t] : checkpoint) shapes[name] = t.shape();
  const auto head = shapes.find("c7s1_in.weight");
  if (head == shapes.end() || head->second.size() != 4) {
    throw InvalidArgument("checkpoint does not contain a generator");
  }
  GeneratorSpec spec;
  spec.width_scale = head->second[0] / 64.0;
  spec.residual_blocks = 0;
  while (shapes.count("R" + std::to_string(spec.residual_blocks) + ".conv1.weight")) ++spec.residual_blocks;
  const int c512 = scaled_channels(512, spec.width_scale);
  const auto d2 = shapes.find("d2.weight");
  if (d2 == shapes.end() || d2->second[0] != c512) {
    throw InvalidArgument("checkpoint channel widths do not follow a uniform width scale");
  }
  return spec;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image SVBRDF estimation toolkit", "svbrdf"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate-dataset", "Synthesize procedural materials and render training inputs");
  gen->add_option("--out", o.out, "Output dataset directory")->required();
  gen->add_option("--materials", o.dataset.n_materials, "Number of source materials")->capture_default_str();
  gen->add_option("--source-resolution", o.dataset.source_resolution, "Synthesis resolution")->capture_default_str();
  gen->add_option("--target-resolution", o.dataset.target_resolution, "Crop resolution")->capture_default_str();
  gen->add_option("--crops", o.dataset.crops_per_material, "Augmented crops per material")->capture_default_str();
  gen->add_option("--train-env-draws", o.dataset.train_env_draws, "Renders per training crop")->capture_default_str();
  gen->add_option("--test-env-draws", o.dataset.test_env_draws, "Renders per test crop")->capture_default_str();
  gen->add_option("--train-fraction", o.dataset.train_fraction, "Fraction of materials used for training")
      ->capture_default_str();
  gen->add_option("--env-lights", o.dataset.env_lights, "Directional lights per environment")->capture_default_str();
  gen->add_option("--env-dir", o.dataset.env_dir, "Directory of equirectangular env_<id>.pfm files");
  add_scene_flags(gen, o);
  add_seed(gen, o);

  auto* render = app.add_subcommand("render", "Render a material under one point light");
  render->add_option("--material", o.material, "Material directory")->required()->check(CLI::ExistingDirectory);
  render->add_option("--out", o.out, "Output PFM file")->required();
  render->add_option("--light", o.light, "Light position x,y,z in meters (default: flash)");
  render->add_option("--light-color", o.light_color, "Light RGB intensity")->capture_default_str();
  render->add_option("--view", o.view, "Camera position x,y,z in meters (default: flash)");
  add_scene_flags(render, o);
  add_seed(render, o);

  auto* expose = app.add_subcommand("expose", "Auto-expose an HDR image into a linear 8-bit PNG");
  expose->add_option("--in", o.in, "Input PFM")->required()->check(CLI::ExistingFile);
  expose->add_option("--out", o.out, "Output PNG")->required();
  add_seed(expose, o);

  auto* fit = app.add_subcommand("fit", "Optimize maps directly against a flash observation");
  fit->add_option("--input", o.in, "Linear flash observation (PFM)")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", o.out, "Output material directory")->required();
  fit->add_option("--init", o.init, "Initial material directory (default: uniform gray)");
  fit->add_option("--ground-truth", o.ground_truth, "Reference material for the multi-view term");
  fit->add_option("--steps", o.fit_steps, "Optimizer steps")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_option("--lr", o.fit_lr, "Learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_option("--views", o.fit_views, "Sampled views per step")->capture_default_str();
  add_scene_flags(fit, o);
  add_seed(fit, o);

  auto* tr = app.add_subcommand("train", "Adversarial training on a generated dataset");
  tr->add_option("--dataset", o.dataset_dir, "Dataset directory or manifest")->required();
  tr->add_option("--out", o.out, "Output directory for checkpoints and loss.csv")->required();
  add_train_flags(tr, o);
  add_scene_flags(tr, o);
  add_seed(tr, o);

  auto* ev = app.add_subcommand("eval", "Evaluate a generator on the test split, or run the ablation grid");
  ev->add_option("--dataset", o.dataset_dir, "Dataset directory or manifest")->required();
  ev->add_option("--out", o.out, "Output directory")->required();
  ev->add_option("--checkpoint", o.checkpoint, "Generator checkpoint")->check(CLI::ExistingFile);
  ev->add_flag("--ablation", o.ablation, "Retrain with each loss term disabled and report the grid");
  add_train_flags(ev, o);
  add_scene_flags(ev, o);
  add_seed(ev, o);

  auto* pr = app.add_subcommand("predict", "Estimate maps from one flash photograph");
  pr->add_option("--input", o.in, "Input PNG (linear) or PFM (auto-exposed)")->required()->check(CLI::ExistingFile);
  pr->add_option("--checkpoint", o.checkpoint, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", o.out, "Output material directory")->required();
  add_seed(pr, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  std::string command;
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    print_error(err, "usage", subs.empty() ? "" : subs.front()->get_name(), e.what());
    return kExitUsage;
  }
  command = app.get_subcommands().front()->get_name();

  try {
    if (command == "generate-dataset") return cmd_generate(o, out);
    if (command == "render") return cmd_render(o, out);
    if (command == "expose") return cmd_expose(o, out);
    if (command == "fit") return cmd_fit(o, out);
    if (command == "train") return cmd_train(o, out);
    if (command == "eval") return cmd_eval(o, out);
    if (command == "predict") return cmd_predict(o, out);
  } catch (const UsageError& e) {
    print_error(err, "usage", command, e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    print_error(err, "io", command, e.what());
    return kExitFailure;
  } catch (const ShapeError& e) {
    print_error(err, "shape", command, e.what());
    return kExitFailure;
  } catch (const InvalidArgument& e) {
    print_error(err, "invalid-argument", command, e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error(err, "runtime", command, e.what());
    return kExitFailure;
  }
  print_error(err, "usage", command, "unknown command");
  return kExitUsage;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace svbrdf::cli
