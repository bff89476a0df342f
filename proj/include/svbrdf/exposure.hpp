// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svbrdf/image.hpp"

namespace svbrdf {

// Camera-metering constants for converting scene luminance to an exposure.
struct ExposureParams {
  double meter_calibration = 12.5;  // K, reflected-light meter constant
  double lens_attenuation = 0.65;   // q
  double iso = 100.0;               // S
};

// Saturation-based sensitivity constant: H_sbs = 78 / S.
inline constexpr double kSaturationSensitivity = 78.0;

// Mean Rec.709 luminance of an RGB image.
double average_luminance(const HdrImage& img);

// EV100 = log2(L_avg S / K).
double ev100_from_luminance(double average_luminance, const ExposureParams& p = {});

// Luminance that maps to 1.0 after exposure: (78 / (q S)) 2^EV100.
double max_luminance(double ev100, const ExposureParams& p = {});

// Divides by L_max and clips to [0,1]; stays in linear space. All-black
// inputs are returned unchanged with a diagnostic.
LdrImage apply_auto_exposure(const HdrImage& img, const ExposureParams& p = {});

// The scalar the image is multiplied by (1 / L_max), or 1 for a black image.
double exposure_scale(const HdrImage& img, const ExposureParams& p = {});

}  // namespace svbrdf
