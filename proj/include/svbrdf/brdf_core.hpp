// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "svbrdf/common.hpp"
#include "svbrdf/image.hpp"

namespace svbrdf {

// Per-pixel material parameters in the metallic workflow: linear base color,
// unit tangent-space normal (z > 0), roughness and metallic. Eight scalars per
// pixel, all four maps at the same resolution.
struct SvbrdfMaps {
  Image base_color;  // 3 channels, linear [0,1]
  Image normal;      // 3 channels, unit length
  Image roughness;   // 1 channel, [0,1]
  Image metallic;    // 1 channel, [0,1]

  SvbrdfMaps() = default;
  SvbrdfMaps(int height, int width);

  // Constant material: every pixel shares the same parameters.
  static SvbrdfMaps uniform(int height, int width, Vec3f base_color, Vec3f normal, float roughness,
                            float metallic);

  int height() const { return base_color.height; }
  int width() const { return base_color.width; }
};

// Throws InvalidArgument describing the first violated invariant.
void validate(const SvbrdfMaps& maps, float normal_tolerance = 1e-5f);

// Diffuse and specular albedo derived from base color and metallic.
struct DiffuseSpecularMaps {
  Image diffuse;   // 3 channels
  Image specular;  // 3 channels
};

// Reflectance of dielectrics at normal incidence in the metallic workflow.
inline constexpr double kDielectricF0 = 0.04;

template <typename T>
struct DiffuseSpecular {
  Vec3<T> diffuse;
  Vec3<T> specular;
};

// d = b (1 - m), s = 0.04 (1 - m) + b m, per component.
template <typename T>
constexpr DiffuseSpecular<T> split_metallic(const Vec3<T>& base_color, T metallic) {
  const T dielectric = T(kDielectricF0) * (T(1) - metallic);
  return {base_color * (T(1) - metallic),
          Vec3<T>(dielectric, dielectric, dielectric) + base_color * metallic};
}

DiffuseSpecularMaps split_metallic(const SvbrdfMaps& maps);

// sRGB transfer functions on a single channel value. Out-of-range inputs are
// clamped to [0,1] and reported as a diagnostic.
float srgb_to_linear(float c);
float linear_to_srgb(float c);
double srgb_to_linear(double c);
double linear_to_srgb(double c);

Image srgb_to_linear(const Image& img);
Image linear_to_srgb(const Image& img);

// Tangent-space normal codec: n = normalize(2 rgb - 1). Zero vectors decode
// to (0,0,1); negative z is flipped to keep the surface facing the viewer.
Vec3f decode_normal(Vec3f rgb);
Vec3f encode_normal(Vec3f n);
Image decode_normal(const Image& rgb);
Image encode_normal(const Image& normals);

// Material directory: basecolor.png (sRGB), normal.png, roughness.png and
// metallic.png (linear). When `<name>.pfm` exists it is preferred over the
// PNG and is read as linear float data.
SvbrdfMaps load_material(const std::filesystem::path& dir);
void save_material(const std::filesystem::path& dir, const SvbrdfMaps& maps);
void save_material_pfm(const std::filesystem::path& dir, const SvbrdfMaps& maps);

}  // namespace svbrdf
