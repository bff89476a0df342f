// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace svbrdf {

// Planar float image: `channels` planes of height x width, row 0 at the top.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  std::span<float> plane(int c) { return {data.data() + c * pixels(), pixels()}; }
  std::span<const float> plane(int c) const { return {data.data() + c * pixels(), pixels()}; }

  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

// Strongly typed wrappers distinguishing linear radiance from display-ready
// [0,1] data. Both are plain Images underneath.
template <typename Tag>
struct TaggedImage : Image {
  TaggedImage() = default;
  explicit TaggedImage(Image img) : Image(std::move(img)) {}
  TaggedImage(int c, int h, int w, float fill = 0.0f) : Image(c, h, w, fill) {}
};

using HdrImage = TaggedImage<struct HdrTag>;
using LdrImage = TaggedImage<struct LdrTag>;

// Portable float map. 1 (Pf) or 3 (PF) channels; written little-endian
// (negative scale) with rows stored bottom-to-top as the format requires.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& img);

// 8-bit PNG, grayscale or RGB. Values are mapped linearly between [0,1] and
// [0,255] with no transfer function; callers own any sRGB conversion.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

// Round-to-nearest 8-bit quantization of a [0,1] value, and its inverse.
inline unsigned char quantize8(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<unsigned char>(c * 255.0f + 0.5f);
}
inline float dequantize8(unsigned char v) { return static_cast<float>(v) / 255.0f; }

}  // namespace svbrdf
