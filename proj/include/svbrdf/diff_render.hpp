// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

// Direct-illumination renderer for a flat material patch lying in the z = 0
// plane, centered at the origin with +y pointing towards the top image row.
// The camera looks straight down, so pixel (y, x) sees texel (y, x) and only
// the per-pixel view direction depends on the camera position.

#pragma once

#include <span>
#include <vector>

#include "svbrdf/brdf_core.hpp"
#include "svbrdf/common.hpp"
#include "svbrdf/image.hpp"
#include "svbrdf/tensor.hpp"

namespace svbrdf {

struct SceneConfig {
  double patch_size_m = 0.30;
  double camera_height_m = 0.50;
  double fov_deg = 45.0;
  Vec3d flash_intensity{1.0, 1.0, 1.0};
  Vec3d flash_color_temp_scale{1.0, 1.0, 1.0};

  // Throws InvalidArgument on non-positive sizes, an fov outside (10, 120)
  // degrees, or a patch that does not fit in the field of view.
  void validate() const;
  Vec3d flash_position() const { return {0.0, 0.0, camera_height_m}; }
  Vec3d flash_color() const { return flash_intensity * flash_color_temp_scale; }
};

struct PointLight {
  Vec3d position;
  Vec3d color{1.0, 1.0, 1.0};
};

// Distant light arriving from `direction` (unit, towards the light) with the
// given irradiance at normal incidence.
struct DirectionalLight {
  Vec3d direction;
  Vec3d irradiance;
};

// One re-rendering configuration for the rendering loss.
struct LossView {
  PointLight light;
  Vec3d view_pos;
  bool mirrored = false;
  Vec3d surface_point;  // anchor of a mirrored pair
};

// Collocated camera and flash at the configured height.
LossView flash_view(const SceneConfig& cfg);

HdrImage render_flash(const SvbrdfMaps& maps, const SceneConfig& cfg = {});
HdrImage render_point_light(const SvbrdfMaps& maps, const PointLight& light, const Vec3d& view_pos,
                            const SceneConfig& cfg = {});
HdrImage render_scene(const SvbrdfMaps& maps, std::span<const PointLight> points,
                      std::span<const DirectionalLight> distant, const Vec3d& view_pos,
                      const SceneConfig& cfg = {});

// `count` light/view pairs on a sphere of radius 2 patch_size. The first half
// are independent uniform hemisphere positions; in the second half the view
// is the mirror image of the light about the plane normal at a random point
// of the patch. Light colors are uniform in [0.5, 1.5] per channel.
std::vector<LossView> sample_loss_views(Rng& rng, int count, const SceneConfig& cfg = {});

// Elementwise log(1 + x); negative input throws.
HdrImage log_tonemap(const HdrImage& img);

// Gradient of <upstream, render_point_light(maps, view)> with respect to the
// maps. The normal gradient is taken with respect to the stored components.
SvbrdfMaps render_vjp(const SvbrdfMaps& maps, const LossView& view, const HdrImage& upstream,
                      const SceneConfig& cfg = {});

// Planar 8-channel layout in Param order: base color, normal, roughness,
// metallic.
std::vector<float> pack_maps(const SvbrdfMaps& maps);
SvbrdfMaps unpack_maps(std::span<const float> params, int height, int width);
ad::TensorF maps_to_tensor(std::span<const SvbrdfMaps> maps);
SvbrdfMaps tensor_to_maps(const ad::TensorF& params, int batch_index = 0);

// Differentiable render of a (B, 8, H, W) parameter tensor to (B, 3, H, W).
template <typename T>
ad::Tensor<T> render(const ad::Tensor<T>& params, const LossView& view, const SceneConfig& cfg = {});

namespace detail {

template <typename T>
struct RenderSetup {
  int height = 0;
  int width = 0;
  T patch_size{};
  Vec3<T> light_pos;
  Vec3<T> light_color;
  Vec3<T> view_pos;
};

// Shades rows [row_begin, row_end) of a planar parameter buffer into a planar
// RGB buffer.
template <typename T>
void render_rows(const RenderSetup<T>& s, const T* params, T* out, int row_begin, int row_end);

// Accumulates the parameter gradient for rows [row_begin, row_end).
template <typename T>
void render_vjp_rows(const RenderSetup<T>& s, const T* params, const T* upstream, T* grad, int row_begin,
                     int row_end);

// Whole-image versions, parallel over rows.
template <typename T>
void render_planar(const RenderSetup<T>& s, const T* params, T* out);
template <typename T>
void render_vjp_planar(const RenderSetup<T>& s, const T* params, const T* upstream, T* grad);

}  // namespace detail

namespace reference {

// Single-threaded renders with the same contracts as the parallel ones.
HdrImage render_point_light(const SvbrdfMaps& maps, const PointLight& light, const Vec3d& view_pos,
                            const SceneConfig& cfg = {});
SvbrdfMaps render_vjp(const SvbrdfMaps& maps, const LossView& view, const HdrImage& upstream,
                      const SceneConfig& cfg = {});

}  // namespace reference

}  // namespace svbrdf
