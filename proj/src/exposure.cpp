// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/exposure.hpp"

#include <algorithm>
#include <cmath>

#include "svbrdf/common.hpp"

namespace svbrdf {

namespace {
constexpr double kLumaR = 0.2126, kLumaG = 0.7152, kLumaB = 0.0722;
}

double average_luminance(const HdrImage& img) {
  if (img.empty()) throw InvalidArgument("average_luminance of an empty image");
  if (img.channels != 3) throw ShapeError("average_luminance expects an RGB image");
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    sum += kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  }
  return sum / static_cast<double>(r.size());
}

double ev100_from_luminance(double average_luminance, const ExposureParams& p) {
  if (!(average_luminance > 0.0)) throw InvalidArgument("average luminance must be positive");
  return std::log2(average_luminance * p.iso / p.meter_calibration);
}

double max_luminance(double ev100, const ExposureParams& p) {
  return kSaturationSensitivity / (p.lens_attenuation * p.iso) * std::exp2(ev100);
}

double exposure_scale(const HdrImage& img, const ExposureParams& p) {
  const double l_avg = average_luminance(img);
  if (!(l_avg > 0.0)) return 1.0;
  return 1.0 / max_luminance(ev100_from_luminance(l_avg, p), p);
}

LdrImage apply_auto_exposure(const HdrImage& img, const ExposureParams& p) {
  const double l_avg = average_luminance(img);
  if (!(l_avg > 0.0)) {
    report_diagnostic("exposure", "image has zero average luminance; left unchanged");
    return LdrImage(static_cast<const Image&>(img));
  }
  const float scale = static_cast<float>(1.0 / max_luminance(ev100_from_luminance(l_avg, p), p));
  LdrImage out(static_cast<const Image&>(img));
  for (float& v : out.data) v = std::clamp(v * scale, 0.0f, 1.0f);
  return out;
}

}  // namespace svbrdf
