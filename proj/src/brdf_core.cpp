// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/brdf_core.hpp"

#include <algorithm>
#include <sstream>

namespace svbrdf {

SvbrdfMaps::SvbrdfMaps(int height, int width)
    : base_color(3, height, width), normal(3, height, width), roughness(1, height, width),
      metallic(1, height, width) {
  std::fill(normal.plane(2).begin(), normal.plane(2).end(), 1.0f);
}

SvbrdfMaps SvbrdfMaps::uniform(int height, int width, Vec3f base_color, Vec3f normal,
                               float roughness, float metallic) {
  SvbrdfMaps maps(height, width);
  const Vec3f n = svbrdf::normalize(normal);
  for (int c = 0; c < 3; ++c) {
    std::ranges::fill(maps.base_color.plane(c), base_color[c]);
    std::ranges::fill(maps.normal.plane(c), n[c]);
  }
  std::ranges::fill(maps.roughness.data, roughness);
  std::ranges::fill(maps.metallic.data, metallic);
  return maps;
}

void validate(const SvbrdfMaps& maps, float normal_tolerance) {
  const int h = maps.height(), w = maps.width();
  auto check_shape = [&](const Image& img, int channels, const char* name) {
    if (img.channels != channels || img.height != h || img.width != w) {
      std::ostringstream os;
      os << name << " has shape " << img.channels << "x" << img.height << "x" << img.width
         << ", expected " << channels << "x" << h << "x" << w;
      throw InvalidArgument(os.str());
    }
  };
  check_shape(maps.base_color, 3, "base_color");
  check_shape(maps.normal, 3, "normal");
  check_shape(maps.roughness, 1, "roughness");
  check_shape(maps.metallic, 1, "metallic");

  auto check_unit_range = [](const Image& img, const char* name) {
    for (float v : img.data) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw InvalidArgument(std::string(name) + " value out of [0,1]: " + std::to_string(v));
      }
    }
  };
  check_unit_range(maps.base_color, "base_color");
  check_unit_range(maps.roughness, "roughness");
  check_unit_range(maps.metallic, "metallic");

  const std::size_t n = maps.normal.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const float x = maps.normal.data[i], y = maps.normal.data[n + i], z = maps.normal.data[2 * n + i];
    const float len = std::sqrt(x * x + y * y + z * z);
    if (!std::isfinite(len) || std::abs(len - 1.0f) > normal_tolerance || !(z > 0.0f)) {
      throw InvalidArgument("normal at pixel " + std::to_string(i) + " is not a unit vector with z > 0");
    }
  }
}

DiffuseSpecularMaps split_metallic(const SvbrdfMaps& maps) {
  const int h = maps.height(), w = maps.width();
  DiffuseSpecularMaps out{Image(3, h, w), Image(3, h, w)};
  const std::size_t n = maps.base_color.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3f b(maps.base_color.data[i], maps.base_color.data[n + i], maps.base_color.data[2 * n + i]);
    const auto ds = split_metallic(b, maps.metallic.data[i]);
    for (int c = 0; c < 3; ++c) {
      out.diffuse.data[c * n + i] = ds.diffuse[c];
      out.specular.data[c * n + i] = ds.specular[c];
    }
  }
  return out;
}

namespace {

template <typename T>
T clamp_unit(T c, const char* fn) {
  if (!(c >= T(0) && c <= T(1))) {
    report_diagnostic("clamp", std::string(fn) + " input " + std::to_string(static_cast<double>(c)) +
                                   " clamped to [0,1]");
    if (!(c >= T(0))) return T(0);  // also catches NaN
    return T(1);
  }
  return c;
}

template <typename T>
T srgb_decode(T c) {
  c = clamp_unit(c, "srgb_to_linear");
  return c <= T(0.04045) ? c / T(12.92) : std::pow((c + T(0.055)) / T(1.055), T(2.4));
}

template <typename T>
T srgb_encode(T c) {
  c = clamp_unit(c, "linear_to_srgb");
  return c <= T(0.0031308) ? c * T(12.92) : T(1.055) * std::pow(c, T(1) / T(2.4)) - T(0.055);
}

}  // namespace

float srgb_to_linear(float c) { return static_cast<float>(srgb_decode(static_cast<double>(c))); }
float linear_to_srgb(float c) { return static_cast<float>(srgb_encode(static_cast<double>(c))); }
double srgb_to_linear(double c) { return srgb_decode(c); }
double linear_to_srgb(double c) { return srgb_encode(c); }

Image srgb_to_linear(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = srgb_to_linear(v);
  return out;
}

Image linear_to_srgb(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = linear_to_srgb(v);
  return out;
}

Vec3f decode_normal(Vec3f rgb) {
  Vec3f v = rgb * 2.0f - Vec3f(1.0f, 1.0f, 1.0f);
  const float len = length(v);
  if (!(len > 1e-8f)) return {0.0f, 0.0f, 1.0f};
  v = v / len;
  if (v.z < 0.0f) v.z = -v.z;
  return v;
}

Vec3f encode_normal(Vec3f n) { return (n + Vec3f(1.0f, 1.0f, 1.0f)) * 0.5f; }

Image decode_normal(const Image& rgb) {
  if (rgb.channels != 3) throw ShapeError("decode_normal expects 3 channels");
  Image out(3, rgb.height, rgb.width);
  const std::size_t n = rgb.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3f d = decode_normal(Vec3f(rgb.data[i], rgb.data[n + i], rgb.data[2 * n + i]));
    for (int c = 0; c < 3; ++c) out.data[c * n + i] = d[c];
  }
  return out;
}

Image encode_normal(const Image& normals) {
  if (normals.channels != 3) throw ShapeError("encode_normal expects 3 channels");
  Image out = normals;
  for (float& v : out.data) v = (v + 1.0f) * 0.5f;
  return out;
}

namespace {

Image load_channel_image(const std::filesystem::path& dir, const std::string& stem, int channels) {
  const auto pfm = dir / (stem + ".pfm");
  const auto png = dir / (stem + ".png");
  Image img;
  bool from_pfm = false;
  if (std::filesystem::exists(pfm)) {
    img = read_pfm(pfm);
    from_pfm = true;
  } else if (std::filesystem::exists(png)) {
    img = read_png(png);
  } else {
    throw IoError("missing " + png.string());
  }
  if (img.channels != channels) {
    if (channels == 1 && img.channels == 3) {
      Image gray(1, img.height, img.width);
      std::copy(img.plane(0).begin(), img.plane(0).end(), gray.data.begin());
      img = std::move(gray);
    } else {
      throw IoError(stem + " has " + std::to_string(img.channels) + " channels");
    }
  }
  if (stem == "basecolor" && !from_pfm) img = srgb_to_linear(img);
  if (stem == "normal" && !from_pfm) img = decode_normal(img);
  return img;
}

}  // namespace

SvbrdfMaps load_material(const std::filesystem::path& dir) {
  SvbrdfMaps maps;
  maps.base_color = load_channel_image(dir, "basecolor", 3);
  maps.normal = load_channel_image(dir, "normal", 3);
  maps.roughness = load_channel_image(dir, "roughness", 1);
  maps.metallic = load_channel_image(dir, "metallic", 1);
  validate(maps, 1e-3f);
  return maps;
}

void save_material(const std::filesystem::path& dir, const SvbrdfMaps& maps) {
  std::filesystem::create_directories(dir);
  write_png(dir / "basecolor.png", linear_to_srgb(maps.base_color));
  write_png(dir / "normal.png", encode_normal(maps.normal));
  write_png(dir / "roughness.png", maps.roughness);
  write_png(dir / "metallic.png", maps.metallic);
}

void save_material_pfm(const std::filesystem::path& dir, const SvbrdfMaps& maps) {
  std::filesystem::create_directories(dir);
  write_pfm(dir / "basecolor.pfm", maps.base_color);
  write_pfm(dir / "normal.pfm", maps.normal);
  write_pfm(dir / "roughness.pfm", maps.roughness);
  write_pfm(dir / "metallic.pfm", maps.metallic);
}

}  // namespace svbrdf
