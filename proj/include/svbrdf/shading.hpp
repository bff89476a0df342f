// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "svbrdf/brdf_core.hpp"
#include "svbrdf/common.hpp"

namespace svbrdf {

// Smallest GGX alpha; keeps D finite for perfectly smooth surfaces.
inline constexpr double kMinAlpha = 1e-3;
// Configurations with (n.wi)(n.wo) below this are treated as beyond the horizon.
inline constexpr double kHorizonEpsilon = 1e-6;

template <typename T>
struct ShadingPoint {
  Vec3<T> base_color;  // linear
  Vec3<T> normal;      // unit
  T roughness{};
  T metallic{};
};

template <typename T>
struct DirectionPair {
  Vec3<T> omega_i;  // towards the light
  Vec3<T> omega_o;  // towards the viewer
};

// Parameter order used by BrdfJacobian columns and by the 8-channel map
// layout everywhere in the library.
enum Param : int {
  kBaseR = 0,
  kBaseG = 1,
  kBaseB = 2,
  kNormalX = 3,
  kNormalY = 4,
  kNormalZ = 5,
  kRoughness = 6,
  kMetallic = 7,
  kNumParams = 8,
};

template <typename T>
struct BrdfValueGrad {
  Vec3<T> value;
  // jacobian[c][p] = d value[c] / d param p
  std::array<std::array<T, kNumParams>, 3> jacobian{};
};

template <typename T>
T roughness_to_alpha(T roughness) {
  return std::max(roughness * roughness, T(kMinAlpha));
}

// Isotropic GGX (Trowbridge-Reitz) normal distribution.
template <typename T>
T ggx_ndf(T alpha, T n_dot_h) {
  alpha = std::max(alpha, T(kMinAlpha));
  const T a2 = alpha * alpha;
  const T t = n_dot_h * n_dot_h * (a2 - T(1)) + T(1);
  return a2 / (kPi<T> * t * t);
}

// Separable Smith masking term for one direction.
template <typename T>
T smith_g1(T a2, T cos_theta) {
  const T q = std::sqrt(a2 + (T(1) - a2) * cos_theta * cos_theta);
  return T(2) * cos_theta / (cos_theta + q);
}

template <typename T>
T schlick_weight(T cos_theta) {
  const T m = std::clamp(T(1) - cos_theta, T(0), T(1));
  const T m2 = m * m;
  return m2 * m2 * m;
}

namespace detail {

template <typename T>
struct ShadingTerms {
  bool valid = false;
  T n_dot_l{}, n_dot_v{}, n_dot_h{}, l_dot_h{}, v_dot_h{};
  Vec3<T> half;
};

template <typename T>
ShadingTerms<T> shading_terms(const Vec3<T>& n, const DirectionPair<T>& dirs) {
  ShadingTerms<T> s;
  s.n_dot_l = dot(n, dirs.omega_i);
  s.n_dot_v = dot(n, dirs.omega_o);
  if (!(s.n_dot_l > T(0)) || !(s.n_dot_v > T(0)) || s.n_dot_l * s.n_dot_v < T(kHorizonEpsilon)) {
    return s;
  }
  s.half = normalize(dirs.omega_i + dirs.omega_o);
  s.n_dot_h = dot(n, s.half);
  s.l_dot_h = dot(dirs.omega_i, s.half);
  s.v_dot_h = dot(dirs.omega_o, s.half);
  s.valid = s.n_dot_h > T(0);
  return s;
}

}  // namespace detail

// Cook-Torrance GGX specular plus Burley diffuse in the metallic workflow.
// Returns zero below the horizon of the shading normal.
template <typename T>
Vec3<T> eval_brdf(const ShadingPoint<T>& p, const DirectionPair<T>& dirs) {
  const auto s = detail::shading_terms(p.normal, dirs);
  if (!s.valid) return {};
  const auto ds = split_metallic(p.base_color, p.metallic);

  const T alpha = roughness_to_alpha(p.roughness);
  const T a2 = alpha * alpha;
  const T d = ggx_ndf(alpha, s.n_dot_h);
  const T g = smith_g1(a2, s.n_dot_l) * smith_g1(a2, s.n_dot_v);
  const T spec_scalar = d * g / (T(4) * s.n_dot_l * s.n_dot_v);
  const T fw = schlick_weight(s.v_dot_h);

  const T fd90 = T(0.5) + T(2) * p.roughness * s.l_dot_h * s.l_dot_h;
  const T fl = T(1) + (fd90 - T(1)) * schlick_weight(s.n_dot_l);
  const T fv = T(1) + (fd90 - T(1)) * schlick_weight(s.n_dot_v);
  const T diffuse_scalar = fl * fv / kPi<T>;

  Vec3<T> out;
  for (int c = 0; c < 3; ++c) {
    const T fresnel = ds.specular[c] + (T(1) - ds.specular[c]) * fw;
    out[c] = ds.diffuse[c] * diffuse_scalar + fresnel * spec_scalar;
  }
  return out;
}

// Value and analytic Jacobian with respect to base color, the (unnormalized)
// normal components, roughness and metallic. At the alpha clamp the
// derivative through alpha is the one-sided (zero) derivative.
template <typename T>
BrdfValueGrad<T> eval_brdf_grad(const ShadingPoint<T>& p, const DirectionPair<T>& dirs) {
  BrdfValueGrad<T> out;
  const auto s = detail::shading_terms(p.normal, dirs);
  if (!s.valid) return out;
  const auto ds = split_metallic(p.base_color, p.metallic);
  const T m = p.metallic;

  // Specular scalar S = D G / (4 NL NV) and its partials.
  const T r2 = p.roughness * p.roughness;
  const bool alpha_clamped = r2 < T(kMinAlpha);
  const T alpha = alpha_clamped ? T(kMinAlpha) : r2;
  const T a2 = alpha * alpha;
  const T dalpha_dr = alpha_clamped ? T(0) : T(2) * p.roughness;

  const T nh = s.n_dot_h, nl = s.n_dot_l, nv = s.n_dot_v;
  const T t = nh * nh * (a2 - T(1)) + T(1);
  const T d = a2 / (kPi<T> * t * t);
  const T dd_da2 = (t - T(2) * a2 * nh * nh) / (kPi<T> * t * t * t);
  const T dd_dnh = -T(4) * a2 * nh * (a2 - T(1)) / (kPi<T> * t * t * t);

  auto g1_parts = [a2](T c) {
    const T q = std::sqrt(a2 + (T(1) - a2) * c * c);
    const T cq = c + q;
    struct {
      T g, dg_dc, dg_da2;
    } r{T(2) * c / cq, T(2) * a2 / (q * cq * cq), -c * (T(1) - c * c) / (q * cq * cq)};
    return r;
  };
  const auto gl = g1_parts(nl);
  const auto gv = g1_parts(nv);
  const T g = gl.g * gv.g;
  const T denom = T(4) * nl * nv;
  const T spec = d * g / denom;
  const T dspec_dnh = dd_dnh * g / denom;
  const T dspec_dnl = d * (gl.dg_dc * gv.g) / denom - spec / nl;
  const T dspec_dnv = d * (gl.g * gv.dg_dc) / denom - spec / nv;
  const T dspec_da2 = (dd_da2 * g + d * (gl.dg_da2 * gv.g + gl.g * gv.dg_da2)) / denom;
  const T dspec_dr = dspec_da2 * T(2) * alpha * dalpha_dr;

  const T fw = schlick_weight(s.v_dot_h);

  // Diffuse scalar K = FL FV / pi.
  const T fd90 = T(0.5) + T(2) * p.roughness * s.l_dot_h * s.l_dot_h;
  const T wl = schlick_weight(nl), wv = schlick_weight(nv);
  const T fl = T(1) + (fd90 - T(1)) * wl;
  const T fv = T(1) + (fd90 - T(1)) * wv;
  const T diff = fl * fv / kPi<T>;
  const T oml = T(1) - nl, omv = T(1) - nv;
  const T dwl_dnl = -T(5) * oml * oml * oml * oml;
  const T dwv_dnv = -T(5) * omv * omv * omv * omv;
  const T ddiff_dnl = (fd90 - T(1)) * dwl_dnl * fv / kPi<T>;
  const T ddiff_dnv = fl * (fd90 - T(1)) * dwv_dnv / kPi<T>;
  const T ddiff_dfd90 = (wl * fv + fl * wv) / kPi<T>;
  const T ddiff_dr = ddiff_dfd90 * T(2) * s.l_dot_h * s.l_dot_h;

  for (int c = 0; c < 3; ++c) {
    const T sc = ds.specular[c];
    const T fresnel = sc + (T(1) - sc) * fw;
    const T dfres_ds = T(1) - fw;
    const T value = ds.diffuse[c] * diff + fresnel * spec;
    out.value[c] = value;
    auto& row = out.jacobian[c];
    // base color: dd/db = 1 - m, ds/db = m (same channel only)
    row[kBaseR + c] = (T(1) - m) * diff + dfres_ds * m * spec;
    // normal: through n.l, n.v, n.h
    const T dv_dnl = ds.diffuse[c] * ddiff_dnl + fresnel * dspec_dnl;
    const T dv_dnv = ds.diffuse[c] * ddiff_dnv + fresnel * dspec_dnv;
    const T dv_dnh = fresnel * dspec_dnh;
    for (int k = 0; k < 3; ++k) {
      row[kNormalX + k] = dv_dnl * dirs.omega_i[k] + dv_dnv * dirs.omega_o[k] + dv_dnh * s.half[k];
    }
    row[kRoughness] = ds.diffuse[c] * ddiff_dr + fresnel * dspec_dr;
    // metallic: dd/dm = -b, ds/dm = b - 0.04
    row[kMetallic] = -p.base_color[c] * diff + dfres_ds * (p.base_color[c] - T(kDielectricF0)) * spec;
  }
  return out;
}

}  // namespace svbrdf
