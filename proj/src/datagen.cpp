// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "svbrdf/kernels.hpp"

namespace svbrdf {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RecipeKind kind) {
  switch (kind) {
    case RecipeKind::kChecker: return "checker";
    case RecipeKind::kFractalNoise: return "fractal-noise";
    case RecipeKind::kStripes: return "stripes";
    case RecipeKind::kMetalFlakes: return "metal-flakes";
    case RecipeKind::kBlend: return "blend-of-two";
  }
  return "unknown";
}

RecipeKind recipe_kind_from_string(const std::string& name) {
  for (auto k : {RecipeKind::kChecker, RecipeKind::kFractalNoise, RecipeKind::kStripes, RecipeKind::kMetalFlakes,
                 RecipeKind::kBlend}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown recipe kind '" + name + "'");
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double smoothstep(double e0, double e1, double x) {
  const double t = clamp01((x - e0) / (e1 - e0));
  return t * t * (3.0 - 2.0 * t);
}

// Hash-based lattice value in [0, 1).
double lattice(std::uint64_t seed, int ix, int iy) {
  const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) |
                            static_cast<std::uint32_t>(iy);
  return static_cast<double>(Rng::mix_seed(seed, key) >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
  const double tx = smoothstep(0.0, 1.0, x - fx), ty = smoothstep(0.0, 1.0, y - fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

// Fractal sum of four octaves normalized to [0, 1].
double fbm(std::uint64_t seed, double x, double y) {
  double sum = 0.0, amp = 1.0, norm = 0.0, freq = 1.0;
  for (int o = 0; o < 4; ++o) {
    sum += amp * value_noise(seed + static_cast<std::uint64_t>(o) * 0x9E37u, x * freq, y * freq);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return sum / norm;
}

struct Synthesized {
  SvbrdfMaps maps;
  Image height;
};

double phase_mask(const MaterialRecipe& r, double u, double v) {
  const double fs = std::max(r.feature_scale, 1e-3);
  switch (r.kind) {
    case RecipeKind::kChecker: {
      const long cx = static_cast<long>(std::floor(u / fs)), cy = static_cast<long>(std::floor(v / fs));
      return ((cx + cy) % 2 + 2) % 2 == 0 ? 0.0 : 1.0;
    }
    case RecipeKind::kFractalNoise:
      return smoothstep(0.35, 0.65, fbm(r.seed, u / fs, v / fs));
    case RecipeKind::kStripes: {
      const double t = u * std::cos(r.orientation) + v * std::sin(r.orientation);
      return 0.5 + 0.5 * std::sin(2.0 * kPi<double> * t / fs);
    }
    case RecipeKind::kMetalFlakes: {
      const double cell = fs * 0.25;
      const double gx = u / cell, gy = v / cell;
      const int ix = static_cast<int>(std::floor(gx)), iy = static_cast<int>(std::floor(gy));
      // Nearest flake among the neighboring cells.
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int cx = ix + dx, cy = iy + dy;
          if (lattice(r.seed ^ 0xF1A4Eu, cx, cy) > 0.6) continue;
          const double px = cx + lattice(r.seed ^ 0x1u, cx, cy), py = cy + lattice(r.seed ^ 0x2u, cx, cy);
          const double radius = 0.25 + 0.2 * lattice(r.seed ^ 0x3u, cx, cy);
          if ((gx - px) * (gx - px) + (gy - py) * (gy - py) < radius * radius) return 1.0;
        }
      return 0.0;
    }
    case RecipeKind::kBlend:
      return smoothstep(0.4, 0.6, fbm(r.seed ^ 0xB1E7Du, u / fs, v / fs));
  }
  return 0.0;
}

Synthesized synthesize(const MaterialRecipe& r, int n) {
  Synthesized out{SvbrdfMaps(n, n), Image(1, n, n)};
  if (r.kind == RecipeKind::kBlend) {
    const Synthesized a = synthesize(random_recipe(Rng::mix_seed(r.seed, 1), r.blend_a), n);
    const Synthesized b = synthesize(random_recipe(Rng::mix_seed(r.seed, 2), r.blend_b), n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double t = phase_mask(r, (x + 0.5) / n, (y + 0.5) / n);
        auto mix = [t](float p, float q) { return static_cast<float>(p + (q - p) * t); };
        for (int c = 0; c < 3; ++c) {
          out.maps.base_color.at(c, y, x) = mix(a.maps.base_color.at(c, y, x), b.maps.base_color.at(c, y, x));
        }
        out.maps.roughness.at(0, y, x) = mix(a.maps.roughness.at(0, y, x), b.maps.roughness.at(0, y, x));
        out.maps.metallic.at(0, y, x) = mix(a.maps.metallic.at(0, y, x), b.maps.metallic.at(0, y, x));
        out.height.at(0, y, x) = mix(a.height.at(0, y, x), b.height.at(0, y, x));
      }
    out.maps.normal = normals_from_height(out.height);
    return out;
  }
  const std::uint64_t detail_seed = Rng::mix_seed(r.seed, 0xDE7A11u);
  const double detail_freq = 24.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double u = (x + 0.5) / n, v = (y + 0.5) / n;
      const double m = phase_mask(r, u, v);
      const double detail = fbm(detail_seed, u * detail_freq, v * detail_freq) - 0.5;
      const Vec3d base = r.color_a + (r.color_b - r.color_a) * m;
      for (int c = 0; c < 3; ++c) {
        out.maps.base_color.at(c, y, x) = static_cast<float>(clamp01(base[c] * (1.0 + 2.0 * r.color_jitter * detail)));
      }
      out.maps.roughness.at(0, y, x) =
          static_cast<float>(clamp01(r.roughness_a + (r.roughness_b - r.roughness_a) * m + 0.1 * detail));
      out.maps.metallic.at(0, y, x) = static_cast<float>(clamp01(r.metallic_a + (r.metallic_b - r.metallic_a) * m));
      out.height.at(0, y, x) = static_cast<float>(r.height_amplitude * m + 0.5 * r.height_amplitude * detail);
    }
  out.maps.normal = normals_from_height(out.height);
  return out;
}

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Bilinear sample at continuous coordinates where pixel centers sit at +0.5.
float sample_bilinear(const Image& img, int c, double sx, double sy) {
  const double fx = sx - 0.5, fy = sy - 0.5;
  const double x0 = std::floor(fx), y0 = std::floor(fy);
  const double tx = fx - x0, ty = fy - y0;
  const int ix = static_cast<int>(x0), iy = static_cast<int>(y0);
  auto at = [&](int x, int y) {
    return static_cast<double>(img.at(c, mirror_index(y, img.height), mirror_index(x, img.width)));
  };
  double v = at(ix, iy) * (1.0 - tx) * (1.0 - ty);
  if (tx != 0.0) v += at(ix + 1, iy) * tx * (1.0 - ty);
  if (ty != 0.0) v += at(ix, iy + 1) * (1.0 - tx) * ty;
  if (tx != 0.0 && ty != 0.0) v += at(ix + 1, iy + 1) * tx * ty;
  return static_cast<float>(v);
}

double snap(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

Vec3d sky_direction(double elevation, double azimuth) {
  const double ce = std::cos(elevation);
  return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

double luminance(const Vec3d& c) { return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z; }

EnvApprox normalize_irradiance(EnvApprox env) {
  double e = 0.0;
  for (const auto& l : env.lights) e += luminance(l.irradiance) * std::max(l.direction.z, 0.0);
  if (e > 0.0) {
    for (auto& l : env.lights) l.irradiance = l.irradiance * (1.0 / e);
  }
  return env;
}

}  // namespace

MaterialRecipe random_recipe(std::uint64_t seed, std::optional<RecipeKind> kind) {
  Rng rng(seed);
  MaterialRecipe r;
  r.seed = seed;
  const int pick = rng.uniform_int(5);
  r.kind = kind.value_or(static_cast<RecipeKind>(pick));
  auto color = [&rng]() {
    const double mean = rng.uniform(0.1, 0.9);
    return Vec3d{clamp01(rng.normal(mean, 0.15)), clamp01(rng.normal(mean, 0.15)), clamp01(rng.normal(mean, 0.15))};
  };
  r.color_a = color();
  r.color_b = color();
  r.roughness_a = std::clamp(rng.normal(0.5, 0.25), 0.05, 1.0);
  r.roughness_b = std::clamp(rng.normal(0.5, 0.25), 0.05, 1.0);
  const bool metal = rng.uniform() < 0.2;
  r.metallic_a = metal ? clamp01(rng.normal(0.9, 0.1)) : clamp01(std::abs(rng.normal(0.0, 0.05)));
  r.metallic_b = rng.uniform() < 0.8 ? r.metallic_a : 1.0 - r.metallic_a;
  r.feature_scale = rng.uniform(0.06, 0.3);
  r.height_amplitude = rng.uniform(0.5, 3.0);
  r.orientation = rng.uniform(0.0, kPi<double>);
  r.color_jitter = rng.uniform(0.0, 0.1);
  r.blend_a = static_cast<RecipeKind>(rng.uniform_int(4));
  r.blend_b = static_cast<RecipeKind>(rng.uniform_int(4));
  if (r.kind == RecipeKind::kMetalFlakes) {
    // Dielectric binder with metallic flakes.
    r.metallic_a = std::clamp(std::abs(rng.normal(0.0, 0.03)), 0.0, 0.09);
    r.metallic_b = std::clamp(rng.normal(0.97, 0.02), 0.91, 1.0);
    r.feature_scale = rng.uniform(0.15, 0.3);
  }
  return r;
}

SvbrdfMaps synthesize_material(const MaterialRecipe& recipe, int resolution) {
  if (resolution < 4) throw InvalidArgument("material resolution must be at least 4");
  return synthesize(recipe, resolution).maps;
}

Image normals_from_height(const Image& height) {
  if (height.channels != 1) throw ShapeError("height field must have one channel");
  const int h = height.height, w = height.width;
  Image n(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
      const double dx = xr > xl ? (height.at(0, y, xr) - height.at(0, y, xl)) / (xr - xl) : 0.0;
      // Row index grows downwards while y points up.
      const double dy = yd > yu ? (height.at(0, yu, x) - height.at(0, yd, x)) / (yd - yu) : 0.0;
      const Vec3d v = normalize(Vec3d{-dx, -dy, 1.0});
      n.at(0, y, x) = static_cast<float>(v.x);
      n.at(1, y, x) = static_cast<float>(v.y);
      n.at(2, y, x) = static_cast<float>(v.z);
    }
  return n;
}

SvbrdfMaps augment_one(const SvbrdfMaps& src, const AugmentParams& p, int target) {
  if (target <= 0) throw InvalidArgument("augmentation target must be positive");
  const double side = p.scale * std::min(src.height(), src.width());
  if (!(side > 0.0)) throw InvalidArgument("augmentation scale must be positive");
  const double phi = (p.quarter_turns % 4) * 0.5 * kPi<double> + p.angle_deg * kPi<double> / 180.0;
  const double c = snap(std::cos(phi)), s = snap(std::sin(phi));
  const double step = side / target;
  SvbrdfMaps out(target, target);
  for (int v = 0; v < target; ++v)
    for (int u = 0; u < target; ++u) {
      const double ox = (u + 0.5 - 0.5 * target) * step, oy = (v + 0.5 - 0.5 * target) * step;
      // Counter-clockwise rotation in a y-up frame, written for row-down
      // image coordinates.
      const double sx = p.center_x + c * ox + s * oy;
      const double sy = p.center_y - s * ox + c * oy;
      for (int ch = 0; ch < 3; ++ch) out.base_color.at(ch, v, u) = sample_bilinear(src.base_color, ch, sx, sy);
      out.roughness.at(0, v, u) = sample_bilinear(src.roughness, 0, sx, sy);
      out.metallic.at(0, v, u) = sample_bilinear(src.metallic, 0, sx, sy);
      const double nx = sample_bilinear(src.normal, 0, sx, sy), ny = sample_bilinear(src.normal, 1, sx, sy);
      const double nz = sample_bilinear(src.normal, 2, sx, sy);
      Vec3d n{c * nx + s * ny, -s * nx + c * ny, nz};
      n = length(n) > 0.0 && n.z > 0.0 ? normalize(n) : Vec3d{0.0, 0.0, 1.0};
      out.normal.at(0, v, u) = static_cast<float>(n.x);
      out.normal.at(1, v, u) = static_cast<float>(n.y);
      out.normal.at(2, v, u) = static_cast<float>(n.z);
    }
  return out;
}

AugmentParams random_augment_params(Rng& rng, int source, int target, double min_scale, double max_scale) {
  if (target > source) throw InvalidArgument("augmentation target exceeds the source resolution");
  const double lo = std::max(min_scale, static_cast<double>(target) / source);
  const double hi = std::max(lo, max_scale);
  AugmentParams p;
  p.quarter_turns = rng.uniform_int(4);
  p.angle_deg = rng.uniform(-45.0, 45.0);
  p.scale = rng.uniform(lo, hi);
  const double half = 0.5 * p.scale * source;
  for (int attempt = 0;; ++attempt) {
    p.center_x = rng.uniform(half, source - half);
    p.center_y = rng.uniform(half, source - half);
    if (p.center_x - half >= 0.0 && p.center_x + half <= source && p.center_y - half >= 0.0 &&
        p.center_y + half <= source) {
      break;
    }
    if (attempt > 16) {
      p.center_x = p.center_y = 0.5 * source;
      break;
    }
  }
  return p;
}

std::vector<AugmentedSample> augment(const SvbrdfMaps& source, Rng& rng, int count, int target) {
  if (source.height() != source.width()) throw ShapeError("augmentation expects square source maps");
  std::vector<AugmentedSample> out;
  for (int i = 0; i < count; ++i) {
    const AugmentParams p = random_augment_params(rng, source.height(), target);
    out.push_back({augment_one(source, p, target), p});
  }
  return out;
}

EnvApprox analytic_sky(int id, int count) {
  if (count < 1) throw InvalidArgument("environment needs at least one light");
  Rng rng(Rng::mix_seed(0x5C1E5u, static_cast<std::uint64_t>(id)));
  EnvApprox env;
  env.id = id;
  const double sun_elev = rng.uniform(15.0, 70.0) * kPi<double> / 180.0;
  const double sun_az = rng.uniform(0.0, 2.0 * kPi<double>);
  const double sun_share = rng.uniform(0.3, 0.8);
  const Vec3d sun_color{1.0, rng.uniform(0.8, 1.0), rng.uniform(0.6, 0.95)};
  const Vec3d sky_color{rng.uniform(0.5, 0.8), rng.uniform(0.7, 0.9), 1.0};
  env.lights.push_back({sky_direction(sun_elev, sun_az), sun_color * sun_share});
  const int dome = count - 1;
  const double golden = kPi<double> * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < dome; ++k) {
    // Cosine-distributed spiral over the hemisphere.
    const double z = std::sqrt((k + 0.5) / dome);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden * k + sun_az;
    env.lights.push_back({{r * std::cos(a), r * std::sin(a), z}, sky_color * ((1.0 - sun_share) / dome)});
  }
  return normalize_irradiance(env);
}

EnvApprox sample_equirect(const Image& equirect, int count, Rng& rng) {
  if (equirect.channels != 3 || equirect.empty()) throw ShapeError("environment map must be RGB");
  if (count < 1) throw InvalidArgument("environment needs at least one light");
  const int h = equirect.height, w = equirect.width;
  const int rows = std::max(1, h / 2);
  std::vector<double> cdf(static_cast<std::size_t>(rows) * w);
  double total = 0.0;
  for (int y = 0; y < rows; ++y) {
    const double theta = (y + 0.5) / h * kPi<double>;
    for (int x = 0; x < w; ++x) {
      const Vec3d c{equirect.at(0, y, x), equirect.at(1, y, x), equirect.at(2, y, x)};
      total += std::max(luminance(c), 0.0) * std::sin(theta);
      cdf[static_cast<std::size_t>(y) * w + x] = total;
    }
  }
  if (!(total > 0.0)) throw InvalidArgument("environment map has no energy in the upper hemisphere");
  const double pixel_solid_angle = (2.0 * kPi<double> / w) * (kPi<double> / h);
  EnvApprox env;
  for (int k = 0; k < count; ++k) {
    const double target = (k + rng.uniform()) / count * total;
    const auto idx = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    const int y = static_cast<int>(std::min(idx, cdf.size() - 1) / w), x = static_cast<int>(idx % w);
    const double theta = (y + 0.5) / h * kPi<double>, phi = (x + 0.5) / w * 2.0 * kPi<double>;
    const Vec3d c{equirect.at(0, y, x), equirect.at(1, y, x), equirect.at(2, y, x)};
    const double lum = std::max(luminance(c), 1e-12);
    // L / (N p(w)) with p(w) = lum sin(theta) / (total dOmega / sin(theta)).
    const Vec3d irradiance = c * (total * pixel_solid_angle / (lum * count));
    env.lights.push_back({{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)},
                          irradiance});
  }
  return normalize_irradiance(env);
}

EnvApprox load_environment(const fs::path& path, int id, int count, Rng& rng) {
  try {
    EnvApprox env = sample_equirect(read_pfm(path), count, rng);
    env.id = id;
    return env;
  } catch (const Error& e) {
    report_diagnostic("env-fallback", "cannot use environment '" + path.string() + "' (" + e.what() +
                                          "); using analytic sky " + std::to_string(id));
    return analytic_sky(id, count);
  }
}

EnvApprox rotate_about_z(const EnvApprox& env, double angle) {
  EnvApprox out = env;
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto& l : out.lights) {
    const Vec3d d = l.direction;
    l.direction = {c * d.x - s * d.y, s * d.x + c * d.y, d.z};
  }
  return out;
}

RenderParams random_render_params(Rng& rng, int env_id) {
  RenderParams p;
  p.env_id = env_id;
  p.env_rotation_deg = rng.uniform(0.0, 360.0);
  p.env_strength = rng.uniform(0.05, 0.5);
  p.flash_strength = rng.uniform(0.6, 1.5);
  const double t = rng.uniform(-0.15, 0.15);  // warm to cool flash
  p.color_temp_scale = {1.0 + t, 1.0, 1.0 - t};
  return p;
}

LdrImage render_input(const SvbrdfMaps& maps, const EnvApprox& env, const SceneConfig& cfg,
                      const RenderParams& params, const ExposureParams& exposure) {
  SceneConfig scene = cfg;
  scene.flash_intensity = cfg.flash_intensity * params.flash_strength;
  scene.flash_color_temp_scale = params.color_temp_scale;
  scene.validate();
  const PointLight flash{scene.flash_position(), scene.flash_color()};
  // Env irradiance relative to the flash irradiance at the patch center.
  const double flash_irradiance = luminance(scene.flash_color()) / (scene.camera_height_m * scene.camera_height_m);
  std::vector<DirectionalLight> distant;
  if (params.env_strength > 0.0) {
    for (const auto& l : rotate_about_z(env, params.env_rotation_deg * kPi<double> / 180.0).lights) {
      distant.push_back({l.direction, l.irradiance * (params.env_strength * flash_irradiance)});
    }
  }
  const HdrImage hdr = render_scene(maps, std::span(&flash, 1), distant, scene.flash_position(), scene);
  return apply_auto_exposure(hdr, exposure);
}

LdrImage render_input(const SvbrdfMaps& maps, const EnvApprox& env, const SceneConfig& cfg, Rng& rng,
                      RenderParams* params_out) {
  const RenderParams p = random_render_params(rng, env.id);
  if (params_out) *params_out = p;
  return render_input(maps, env, cfg, p);
}

std::vector<std::string> DatasetManifest::material_ids(Split split) const {
  std::set<std::string> ids;
  for (const auto& r : records)
    if (r.split == split) ids.insert(r.material_id);
  return {ids.begin(), ids.end()};
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [split](const SampleRecord& r) { return r.split == split; }));
}

std::vector<int> environment_pool(Split split, int available) {
  if (available < 2) throw InvalidArgument("need at least two environments for disjoint pools");
  const int test_n = std::clamp(static_cast<int>(std::lround(available * 6.0 / 26.0)), 1, available - 1);
  std::vector<int> ids;
  if (split == Split::kTrain) {
    for (int i = 0; i < available - test_n; ++i) ids.push_back(i);
  } else {
    for (int i = available - test_n; i < available; ++i) ids.push_back(i);
  }
  return ids;
}

std::vector<Split> assign_splits(int n_materials, double train_fraction, std::uint64_t seed) {
  if (n_materials < 0 || !(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw InvalidArgument("invalid split configuration");
  }
  std::vector<int> order(static_cast<std::size_t>(n_materials));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::mix_seed(seed, 0x5911Fu));
  for (int i = n_materials - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
  const int n_train = static_cast<int>(std::lround(train_fraction * n_materials));
  std::vector<Split> splits(static_cast<std::size_t>(n_materials), Split::kTest);
  for (int k = 0; k < n_train; ++k) splits[order[k]] = Split::kTrain;
  return splits;
}

namespace {

json to_json(const SampleRecord& r) {
  return json{
      {"material_id", r.material_id},
      {"split", to_string(r.split)},
      {"recipe",
       {{"kind", to_string(r.recipe.kind)},
        {"seed", r.recipe.seed},
        {"color_a", {r.recipe.color_a.x, r.recipe.color_a.y, r.recipe.color_a.z}},
        {"color_b", {r.recipe.color_b.x, r.recipe.color_b.y, r.recipe.color_b.z}},
        {"roughness", {r.recipe.roughness_a, r.recipe.roughness_b}},
        {"metallic", {r.recipe.metallic_a, r.recipe.metallic_b}},
        {"feature_scale", r.recipe.feature_scale},
        {"height_amplitude", r.recipe.height_amplitude},
        {"orientation", r.recipe.orientation},
        {"color_jitter", r.recipe.color_jitter},
        {"blend", {to_string(r.recipe.blend_a), to_string(r.recipe.blend_b)}}}},
      {"augment",
       {{"index", r.aug_index},
        {"quarter_turns", r.augment.quarter_turns},
        {"angle_deg", r.augment.angle_deg},
        {"scale", r.augment.scale},
        {"center", {r.augment.center_x, r.augment.center_y}}}},
      {"render",
       {{"input_index", r.input_index},
        {"env_id", r.render.env_id},
        {"env_rotation_deg", r.render.env_rotation_deg},
        {"env_strength", r.render.env_strength},
        {"flash_strength", r.render.flash_strength},
        {"color_temp_scale", {r.render.color_temp_scale.x, r.render.color_temp_scale.y, r.render.color_temp_scale.z}}}},
      {"paths", {{"input", r.input_path}, {"material", r.material_dir}}}};
}

Vec3d vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

SampleRecord from_json(const json& j) {
  SampleRecord r;
  r.material_id = j.at("material_id").get<std::string>();
  const auto split = j.at("split").get<std::string>();
  if (split != "train" && split != "test") throw IoError("manifest: bad split '" + split + "'");
  r.split = split == "train" ? Split::kTrain : Split::kTest;
  const json& rc = j.at("recipe");
  r.recipe.kind = recipe_kind_from_string(rc.at("kind").get<std::string>());
  r.recipe.seed = rc.at("seed").get<std::uint64_t>();
  r.recipe.color_a = vec3(rc.at("color_a"));
  r.recipe.color_b = vec3(rc.at("color_b"));
  r.recipe.roughness_a = rc.at("roughness").at(0).get<double>();
  r.recipe.roughness_b = rc.at("roughness").at(1).get<double>();
  r.recipe.metallic_a = rc.at("metallic").at(0).get<double>();
  r.recipe.metallic_b = rc.at("metallic").at(1).get<double>();
  r.recipe.feature_scale = rc.at("feature_scale").get<double>();
  r.recipe.height_amplitude = rc.at("height_amplitude").get<double>();
  r.recipe.orientation = rc.at("orientation").get<double>();
  r.recipe.color_jitter = rc.at("color_jitter").get<double>();
  r.recipe.blend_a = recipe_kind_from_string(rc.at("blend").at(0).get<std::string>());
  r.recipe.blend_b = recipe_kind_from_string(rc.at("blend").at(1).get<std::string>());
  const json& au = j.at("augment");
  r.aug_index = au.at("index").get<int>();
  r.augment.quarter_turns = au.at("quarter_turns").get<int>();
  r.augment.angle_deg = au.at("angle_deg").get<double>();
  r.augment.scale = au.at("scale").get<double>();
  r.augment.center_x = au.at("center").at(0).get<double>();
  r.augment.center_y = au.at("center").at(1).get<double>();
  const json& re = j.at("render");
  r.input_index = re.at("input_index").get<int>();
  r.render.env_id = re.at("env_id").get<int>();
  r.render.env_rotation_deg = re.at("env_rotation_deg").get<double>();
  r.render.env_strength = re.at("env_strength").get<double>();
  r.render.flash_strength = re.at("flash_strength").get<double>();
  r.render.color_temp_scale = vec3(re.at("color_temp_scale"));
  r.input_path = j.at("paths").at("input").get<std::string>();
  r.material_dir = j.at("paths").at("material").get<std::string>();
  return r;
}

std::string material_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "m%05d", index);
  return buf;
}

}  // namespace

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  for (const auto& r : manifest.records) os << to_json(r).dump() << '\n';
  if (!os) throw IoError("failed writing manifest: " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestName : path;
  std::ifstream is(file);
  if (!is) throw IoError("cannot open manifest: " + file.string());
  DatasetManifest m;
  m.root = file.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      m.records.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError("manifest " + file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

DatasetManifest build_dataset(const DatasetConfig& cfg, const fs::path& out_dir) {
  if (cfg.n_materials < 1) throw InvalidArgument("need at least one material");
  if (cfg.crops_per_material < 1 || cfg.train_env_draws < 1 || cfg.test_env_draws < 1) {
    throw InvalidArgument("crop and environment draw counts must be positive");
  }
  if (cfg.target_resolution > cfg.source_resolution) {
    throw InvalidArgument("target resolution exceeds the source resolution");
  }
  cfg.scene.validate();

  std::vector<fs::path> env_files;
  if (!cfg.env_dir.empty()) {
    if (!fs::is_directory(cfg.env_dir)) throw IoError("environment directory not found: " + cfg.env_dir.string());
    for (const auto& e : fs::directory_iterator(cfg.env_dir))
      if (e.path().extension() == ".pfm") env_files.push_back(e.path());
    std::sort(env_files.begin(), env_files.end());
    if (env_files.size() < 2) throw IoError("need at least two .pfm environment maps in " + cfg.env_dir.string());
  }
  const int available = env_files.empty() ? 26 : static_cast<int>(env_files.size());
  std::vector<EnvApprox> envs;
  for (int id = 0; id < available; ++id) {
    if (env_files.empty()) {
      envs.push_back(analytic_sky(id, cfg.env_lights));
    } else {
      Rng env_rng(Rng::mix_seed(cfg.seed, 0xE0000u + static_cast<std::uint64_t>(id)));
      envs.push_back(load_environment(env_files[id], id, cfg.env_lights, env_rng));
    }
  }
  const std::array<std::vector<int>, 2> pools = {environment_pool(Split::kTrain, available),
                                                 environment_pool(Split::kTest, available)};

  fs::create_directories(out_dir);
  const auto splits = assign_splits(cfg.n_materials, cfg.train_fraction, cfg.seed);
  std::vector<std::vector<SampleRecord>> per_material(static_cast<std::size_t>(cfg.n_materials));
  std::vector<std::string> errors(static_cast<std::size_t>(cfg.n_materials));

#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
  for (int i = 0; i < cfg.n_materials; ++i) {
    try {
      Rng rng(Rng::mix_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1));
      const Split split = splits[i];
      const std::string id = material_name(i);
      const MaterialRecipe recipe = random_recipe(rng.next_u64());
      const SvbrdfMaps source = synthesize_material(recipe, cfg.source_resolution);
      const auto crops = augment(source, rng, cfg.crops_per_material, cfg.target_resolution);
      const auto& pool = pools[split == Split::kTrain ? 0 : 1];
      const int draws = split == Split::kTrain ? cfg.train_env_draws : cfg.test_env_draws;
      for (int a = 0; a < static_cast<int>(crops.size()); ++a) {
        const fs::path rel_dir = fs::path(to_string(split)) / id / std::to_string(a);
        validate(crops[a].maps, 1e-4f);
        save_material(out_dir / rel_dir, crops[a].maps);
        for (int k = 0; k < draws; ++k) {
          const int env_id = pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
          const RenderParams rp = random_render_params(rng, env_id);
          const LdrImage input = render_input(crops[a].maps, envs[env_id], cfg.scene, rp);
          const fs::path rel_input = rel_dir / ("input_" + std::to_string(k) + ".png");
          write_png(out_dir / rel_input, input);
          SampleRecord rec;
          rec.material_id = id;
          rec.recipe = recipe;
          rec.split = split;
          rec.aug_index = a;
          rec.augment = crops[a].params;
          rec.input_index = k;
          rec.render = rp;
          rec.input_path = rel_input.generic_string();
          rec.material_dir = rel_dir.generic_string();
          per_material[i].push_back(std::move(rec));
        }
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < cfg.n_materials; ++i) {
    if (!errors[i].empty()) throw IoError("material " + material_name(i) + ": " + errors[i]);
  }

  DatasetManifest manifest;
  manifest.root = out_dir;
  for (auto& recs : per_material)
    for (auto& r : recs) manifest.records.push_back(std::move(r));
  write_manifest(out_dir / kManifestName, manifest);
  return manifest;
}

}  // namespace svbrdf
