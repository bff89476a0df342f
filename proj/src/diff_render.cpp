// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/diff_render.hpp"

#include <algorithm>
#include <cmath>

#include "svbrdf/kernels.hpp"
#include "svbrdf/shading.hpp"

namespace svbrdf {

void SceneConfig::validate() const {
  if (!(patch_size_m > 0.0) || !(camera_height_m > 0.0)) {
    throw InvalidArgument("patch size and camera height must be positive");
  }
  if (!(fov_deg > 10.0 && fov_deg < 120.0)) throw InvalidArgument("fov must lie in (10, 120) degrees");
  for (int c = 0; c < 3; ++c) {
    if (!(flash_intensity[c] > 0.0) || !(flash_color_temp_scale[c] > 0.0)) {
      throw InvalidArgument("flash intensity and color scale must be positive");
    }
  }
  const double half_extent = camera_height_m * std::tan(fov_deg * kPi<double> / 360.0);
  if (0.5 * patch_size_m > half_extent) {
    throw InvalidArgument("patch does not fit in the camera field of view");
  }
}

LossView flash_view(const SceneConfig& cfg) {
  LossView v;
  v.light = {cfg.flash_position(), cfg.flash_color()};
  v.view_pos = cfg.flash_position();
  return v;
}

namespace detail {

namespace {

// Per-pixel shading always runs in double; float buffers only set the
// storage precision.
struct Geometry {
  int height = 0;
  int width = 0;
  double patch_size = 0.0;
  Vec3d light_pos;
  Vec3d light_color;
  Vec3d view_pos;
};

template <typename T>
Geometry widen(const RenderSetup<T>& s) {
  return {s.height, s.width, static_cast<double>(s.patch_size), Vec3d(s.light_pos), Vec3d(s.light_color),
          Vec3d(s.view_pos)};
}

Vec3d pixel_position(const Geometry& g, int y, int x) {
  return {((x + 0.5) / g.width - 0.5) * g.patch_size, (0.5 - (y + 0.5) / g.height) * g.patch_size, 0.0};
}

template <typename T>
ShadingPoint<double> load_point(const T* params, std::size_t plane, std::size_t i) {
  ShadingPoint<double> p;
  p.base_color = {params[kBaseR * plane + i], params[kBaseG * plane + i], params[kBaseB * plane + i]};
  p.normal = {params[kNormalX * plane + i], params[kNormalY * plane + i], params[kNormalZ * plane + i]};
  p.roughness = params[kRoughness * plane + i];
  p.metallic = params[kMetallic * plane + i];
  return p;
}

}  // namespace

template <typename T>
void render_rows(const RenderSetup<T>& s, const T* params, T* out, int row_begin, int row_end) {
  const Geometry g = widen(s);
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (int y = row_begin; y < row_end; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
      const Vec3d pos = pixel_position(g, y, x);
      const Vec3d to_light = g.light_pos - pos;
      const double r2 = dot(to_light, to_light);
      const DirectionPair<double> dirs{to_light / std::sqrt(r2), normalize(g.view_pos - pos)};
      const ShadingPoint<double> p = load_point(params, plane, i);
      const Vec3d f = eval_brdf(p, dirs);
      const double cos_l = std::max(dot(p.normal, dirs.omega_i), 0.0);
      for (int c = 0; c < 3; ++c) out[c * plane + i] = static_cast<T>(f[c] * cos_l * g.light_color[c] / r2);
    }
  }
}

template <typename T>
void render_vjp_rows(const RenderSetup<T>& s, const T* params, const T* upstream, T* grad, int row_begin,
                     int row_end) {
  const Geometry g = widen(s);
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (int y = row_begin; y < row_end; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
      const Vec3d pos = pixel_position(g, y, x);
      const Vec3d to_light = g.light_pos - pos;
      const double r2 = dot(to_light, to_light);
      const DirectionPair<double> dirs{to_light / std::sqrt(r2), normalize(g.view_pos - pos)};
      const ShadingPoint<double> p = load_point(params, plane, i);
      const auto vg = eval_brdf_grad(p, dirs);
      const double cos_l = dot(p.normal, dirs.omega_i);
      if (!(cos_l > 0.0)) continue;
      double acc[kNumParams] = {};
      for (int c = 0; c < 3; ++c) {
        const double w = upstream[c * plane + i] * g.light_color[c] / r2;
        if (w == 0.0) continue;
        for (int k = 0; k < kNumParams; ++k) acc[k] += w * vg.jacobian[c][k] * cos_l;
        for (int k = 0; k < 3; ++k) acc[kNormalX + k] += w * vg.value[c] * dirs.omega_i[k];
      }
      for (int k = 0; k < kNumParams; ++k) grad[k * plane + i] += static_cast<T>(acc[k]);
    }
  }
}

template <typename T>
void render_planar(const RenderSetup<T>& s, const T* params, T* out) {
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (int y = 0; y < s.height; ++y) render_rows(s, params, out, y, y + 1);
}

template <typename T>
void render_vjp_planar(const RenderSetup<T>& s, const T* params, const T* upstream, T* grad) {
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (int y = 0; y < s.height; ++y) render_vjp_rows(s, params, upstream, grad, y, y + 1);
}

template void render_rows<float>(const RenderSetup<float>&, const float*, float*, int, int);
template void render_rows<double>(const RenderSetup<double>&, const double*, double*, int, int);
template void render_vjp_rows<float>(const RenderSetup<float>&, const float*, const float*, float*, int, int);
template void render_vjp_rows<double>(const RenderSetup<double>&, const double*, const double*, double*, int,
                                      int);
template void render_planar<float>(const RenderSetup<float>&, const float*, float*);
template void render_planar<double>(const RenderSetup<double>&, const double*, double*);
template void render_vjp_planar<float>(const RenderSetup<float>&, const float*, const float*, float*);
template void render_vjp_planar<double>(const RenderSetup<double>&, const double*, const double*, double*);

}  // namespace detail

namespace {

template <typename T>
detail::RenderSetup<T> make_setup(int height, int width, const PointLight& light, const Vec3d& view_pos,
                                  const SceneConfig& cfg) {
  if (!(light.position.z > 0.0) || !(view_pos.z > 0.0)) {
    throw InvalidArgument("light and view must lie above the surface");
  }
  return {height, width, static_cast<T>(cfg.patch_size_m), Vec3<T>(light.position), Vec3<T>(light.color),
          Vec3<T>(view_pos)};
}

void check_maps(const SvbrdfMaps& maps) {
  const int h = maps.height(), w = maps.width();
  if (h <= 0 || w <= 0) throw ShapeError("empty material maps");
  if (maps.base_color.channels != 3 || maps.normal.channels != 3 || maps.roughness.channels != 1 ||
      maps.metallic.channels != 1) {
    throw ShapeError("material maps have the wrong channel counts");
  }
  for (const Image* img : {&maps.normal, &maps.roughness, &maps.metallic}) {
    if (img->height != h || img->width != w) throw ShapeError("material maps differ in resolution");
  }
}

Image unpack_image(const std::vector<float>& planes, std::size_t plane, int first, int count, int h, int w) {
  Image img(count, h, w);
  std::copy(planes.begin() + static_cast<std::ptrdiff_t>(first * plane),
            planes.begin() + static_cast<std::ptrdiff_t>((first + count) * plane), img.data.begin());
  return img;
}

}  // namespace

std::vector<float> pack_maps(const SvbrdfMaps& maps) {
  check_maps(maps);
  std::vector<float> out;
  out.reserve(kNumParams * maps.base_color.pixels());
  for (const Image* img : {&maps.base_color, &maps.normal, &maps.roughness, &maps.metallic}) {
    out.insert(out.end(), img->data.begin(), img->data.end());
  }
  return out;
}

SvbrdfMaps unpack_maps(std::span<const float> params, int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (params.size() != kNumParams * plane) throw ShapeError("parameter buffer does not hold 8 planes");
  std::vector<float> v(params.begin(), params.end());
  SvbrdfMaps m;
  m.base_color = unpack_image(v, plane, kBaseR, 3, height, width);
  m.normal = unpack_image(v, plane, kNormalX, 3, height, width);
  m.roughness = unpack_image(v, plane, kRoughness, 1, height, width);
  m.metallic = unpack_image(v, plane, kMetallic, 1, height, width);
  return m;
}

ad::TensorF maps_to_tensor(std::span<const SvbrdfMaps> maps) {
  if (maps.empty()) throw ShapeError("maps_to_tensor of an empty batch");
  const int h = maps[0].height(), w = maps[0].width();
  std::vector<float> data;
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) throw ShapeError("batch maps differ in resolution");
    const auto p = pack_maps(m);
    data.insert(data.end(), p.begin(), p.end());
  }
  return ad::TensorF::from({static_cast<int>(maps.size()), kNumParams, h, w}, std::move(data));
}

SvbrdfMaps tensor_to_maps(const ad::TensorF& params, int batch_index) {
  if (params.rank() != 4 || params.dim(1) != kNumParams) throw ShapeError("expected a (B, 8, H, W) tensor");
  if (batch_index < 0 || batch_index >= params.dim(0)) throw ShapeError("batch index out of range");
  const std::size_t n = static_cast<std::size_t>(kNumParams) * params.dim(2) * params.dim(3);
  return unpack_maps(params.data().subspan(batch_index * n, n), params.dim(2), params.dim(3));
}

HdrImage render_point_light(const SvbrdfMaps& maps, const PointLight& light, const Vec3d& view_pos,
                            const SceneConfig& cfg) {
  check_maps(maps);
  const auto s = make_setup<float>(maps.height(), maps.width(), light, view_pos, cfg);
  const auto params = pack_maps(maps);
  HdrImage out(3, maps.height(), maps.width());
  detail::render_planar(s, params.data(), out.data.data());
  return out;
}

HdrImage render_flash(const SvbrdfMaps& maps, const SceneConfig& cfg) {
  const LossView v = flash_view(cfg);
  return render_point_light(maps, v.light, v.view_pos, cfg);
}

HdrImage render_scene(const SvbrdfMaps& maps, std::span<const PointLight> points,
                      std::span<const DirectionalLight> distant, const Vec3d& view_pos, const SceneConfig& cfg) {
  check_maps(maps);
  const int h = maps.height(), w = maps.width();
  HdrImage out(3, h, w);
  for (const auto& light : points) {
    const HdrImage img = render_point_light(maps, light, view_pos, cfg);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += img.data[i];
  }
  if (distant.empty()) return out;
  const auto params = pack_maps(maps);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const Vec3f view(view_pos);
  const float size = static_cast<float>(cfg.patch_size_m);
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const Vec3f pos{((x + 0.5f) / w - 0.5f) * size, (0.5f - (y + 0.5f) / h) * size, 0.0f};
      ShadingPoint<float> p;
      p.base_color = {params[i], params[plane + i], params[2 * plane + i]};
      p.normal = {params[3 * plane + i], params[4 * plane + i], params[5 * plane + i]};
      p.roughness = params[6 * plane + i];
      p.metallic = params[7 * plane + i];
      const Vec3f wo = normalize(view - pos);
      for (const auto& light : distant) {
        const Vec3f wi = normalize(Vec3f(light.direction));
        const Vec3f f = eval_brdf(p, DirectionPair<float>{wi, wo});
        const float cos_l = std::max(dot(p.normal, wi), 0.0f);
        for (int c = 0; c < 3; ++c) {
          out.data[c * plane + i] += f[c] * cos_l * static_cast<float>(light.irradiance[c]);
        }
      }
    }
  }
  return out;
}

std::vector<LossView> sample_loss_views(Rng& rng, int count, const SceneConfig& cfg) {
  if (count < 0 || count % 2 != 0) throw InvalidArgument("loss view count must be even and non-negative");
  const double radius = 2.0 * cfg.patch_size_m;
  auto hemisphere = [&rng]() {
    const double z = 1.0 - rng.uniform();  // (0, 1]: uniform in solid angle
    const double phi = 2.0 * kPi<double> * rng.uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3d{r * std::cos(phi), r * std::sin(phi), z};
  };
  auto color = [&rng]() { return Vec3d{rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)}; };
  std::vector<LossView> views;
  views.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count / 2; ++k) {
    LossView v;
    v.light.position = hemisphere() * radius;
    v.view_pos = hemisphere() * radius;
    v.light.color = color();
    views.push_back(v);
  }
  for (int k = 0; k < count / 2; ++k) {
    LossView v;
    v.mirrored = true;
    v.surface_point = {(rng.uniform() - 0.5) * cfg.patch_size_m, (rng.uniform() - 0.5) * cfg.patch_size_m, 0.0};
    const Vec3d d = hemisphere();
    v.light.position = v.surface_point + d * radius;
    v.view_pos = v.surface_point + Vec3d{-d.x, -d.y, d.z} * radius;
    v.light.color = color();
    views.push_back(v);
  }
  return views;
}

HdrImage log_tonemap(const HdrImage& img) {
  HdrImage out = img;
  for (float& v : out.data) {
    if (v < 0.0f || std::isnan(v)) throw InvalidArgument("log_tonemap requires non-negative input");
    v = std::log1p(v);
  }
  return out;
}

SvbrdfMaps render_vjp(const SvbrdfMaps& maps, const LossView& view, const HdrImage& upstream,
                      const SceneConfig& cfg) {
  check_maps(maps);
  if (upstream.channels != 3 || upstream.height != maps.height() || upstream.width != maps.width()) {
    throw ShapeError("upstream gradient does not match the render resolution");
  }
  const auto s = make_setup<float>(maps.height(), maps.width(), view.light, view.view_pos, cfg);
  const auto params = pack_maps(maps);
  std::vector<float> grad(params.size(), 0.0f);
  detail::render_vjp_planar(s, params.data(), upstream.data.data(), grad.data());
  return unpack_maps(grad, maps.height(), maps.width());
}

namespace reference {

HdrImage render_point_light(const SvbrdfMaps& maps, const PointLight& light, const Vec3d& view_pos,
                            const SceneConfig& cfg) {
  check_maps(maps);
  const auto s = make_setup<float>(maps.height(), maps.width(), light, view_pos, cfg);
  const auto params = pack_maps(maps);
  HdrImage out(3, maps.height(), maps.width());
  detail::render_rows(s, params.data(), out.data.data(), 0, s.height);
  return out;
}

SvbrdfMaps render_vjp(const SvbrdfMaps& maps, const LossView& view, const HdrImage& upstream,
                      const SceneConfig& cfg) {
  check_maps(maps);
  if (upstream.channels != 3 || upstream.height != maps.height() || upstream.width != maps.width()) {
    throw ShapeError("upstream gradient does not match the render resolution");
  }
  const auto s = make_setup<float>(maps.height(), maps.width(), view.light, view.view_pos, cfg);
  const auto params = pack_maps(maps);
  std::vector<float> grad(params.size(), 0.0f);
  detail::render_vjp_rows(s, params.data(), upstream.data.data(), grad.data(), 0, s.height);
  return unpack_maps(grad, maps.height(), maps.width());
}

}  // namespace reference

template <typename T>
ad::Tensor<T> render(const ad::Tensor<T>& params, const LossView& view, const SceneConfig& cfg) {
  if (params.rank() != 4 || params.dim(1) != kNumParams) {
    throw ShapeError("render expects a (B, 8, H, W) tensor, got " + ad::to_string(params.shape()));
  }
  const int batch = params.dim(0), h = params.dim(2), w = params.dim(3);
  const auto s = make_setup<T>(h, w, view.light, view.view_pos, cfg);
  const std::size_t in_stride = static_cast<std::size_t>(kNumParams) * h * w;
  const std::size_t out_stride = static_cast<std::size_t>(3) * h * w;
  std::vector<T> out(batch * out_stride);
  const auto pv = params.data();
  for (int b = 0; b < batch; ++b) detail::render_planar(s, pv.data() + b * in_stride, out.data() + b * out_stride);
  return ad::make_result<T>("render", {batch, 3, h, w}, std::move(out), {params},
                            [s, batch, in_stride, out_stride](ad::Node<T>& n) {
                              ad::Node<T>& in = *n.inputs[0];
                              if (!in.requires_grad) return;
                              auto& g = in.grad_buffer();
                              for (int b = 0; b < batch; ++b) {
                                detail::render_vjp_planar(s, in.value.data() + b * in_stride,
                                                          n.grad.data() + b * out_stride, g.data() + b * in_stride);
                              }
                            });
}

template ad::Tensor<float> render<float>(const ad::Tensor<float>&, const LossView&, const SceneConfig&);
template ad::Tensor<double> render<double>(const ad::Tensor<double>&, const LossView&, const SceneConfig&);

}  // namespace svbrdf
