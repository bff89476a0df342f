// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include "svbrdf/kernels.hpp"

#include <omp.h>

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "svbrdf/common.hpp"

namespace svbrdf::kernels {

namespace {

std::atomic<int> g_threads{0};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Upper bound on the elements of one im2col tile.
constexpr std::size_t kTileBudget = std::size_t{1} << 20;
constexpr int kChannelBlock = 16;

void check_sizes(const ConvShape& s, std::size_t in, std::size_t w, std::size_t out) {
  if (s.kernel <= 0 || s.stride <= 0 || s.in_height < s.kernel || s.in_width < s.kernel) {
    throw ShapeError("invalid convolution geometry");
  }
  if (in != s.input_size() || w != s.weight_size() || out != s.output_size()) {
    throw ShapeError("convolution buffer size mismatch");
  }
}

int tile_rows(const ConvShape& s, int rows_of_k) {
  const std::size_t per_row = static_cast<std::size_t>(rows_of_k) * s.out_width();
  const std::size_t rows = std::max<std::size_t>(1, kTileBudget / std::max<std::size_t>(1, per_row));
  return static_cast<int>(std::min<std::size_t>(rows, s.out_height()));
}

// Gathers the receptive fields of output rows [oy0, oy1) for input channels
// [c0, c1) into a (channels*k*k) x pixels matrix.
template <typename T>
void im2col_rows(const ConvShape& s, const T* in_b, int oy0, int oy1, int c0, int c1, T* dst) {
  const int k = s.kernel, st = s.stride, wo = s.out_width();
  const std::size_t nt = static_cast<std::size_t>(oy1 - oy0) * wo;
  for (int ci = c0; ci < c1; ++ci) {
    const T* plane = in_b + static_cast<std::size_t>(ci) * s.in_height * s.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = dst + (static_cast<std::size_t>(ci - c0) * k * k + ky * k + kx) * nt;
        for (int oy = oy0; oy < oy1; ++oy) {
          const T* src = plane + static_cast<std::size_t>(oy * st + ky) * s.in_width + kx;
          T* out = row + static_cast<std::size_t>(oy - oy0) * wo;
          if (st == 1) {
            std::copy(src, src + wo, out);
          } else {
            for (int ox = 0; ox < wo; ++ox) out[ox] = src[ox * st];
          }
        }
      }
    }
  }
}

// Adjoint of im2col_rows: scatter-adds the matrix back into the image.
template <typename T>
void col2im_rows(const ConvShape& s, const T* src, int oy0, int oy1, int c0, int c1, T* in_b) {
  const int k = s.kernel, st = s.stride, wo = s.out_width();
  const std::size_t nt = static_cast<std::size_t>(oy1 - oy0) * wo;
  for (int ci = c0; ci < c1; ++ci) {
    T* plane = in_b + static_cast<std::size_t>(ci) * s.in_height * s.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = src + (static_cast<std::size_t>(ci - c0) * k * k + ky * k + kx) * nt;
        for (int oy = oy0; oy < oy1; ++oy) {
          T* dst = plane + static_cast<std::size_t>(oy * st + ky) * s.in_width + kx;
          const T* in = row + static_cast<std::size_t>(oy - oy0) * wo;
          if (st == 1) {
            for (int ox = 0; ox < wo; ++ox) dst[ox] += in[ox];
          } else {
            for (int ox = 0; ox < wo; ++ox) dst[ox * st] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

int max_threads() {
  int n = g_threads.load();
  if (n > 0) return n;
  n = omp_get_max_threads();
  if (const char* env = std::getenv("SVBRDF_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  n = std::max(1, n);
  g_threads.store(n);
  return n;
}

void set_max_threads(int n) { g_threads.store(std::max(1, n)); }

template <typename T>
void conv_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                  std::span<T> output) {
  check_sizes(s, input.size(), weight.size(), output.size());
  const int kk = s.kernel * s.kernel;
  const int K = s.in_channels * kk;
  const int ho = s.out_height(), wo = s.out_width();
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t in_stride = static_cast<std::size_t>(s.in_channels) * s.in_height * s.in_width;
  const int rows = tile_rows(s, K);
  const int ntiles = (ho + rows - 1) / rows;
  const int jobs = s.batch * ntiles;
  ConstMatMap<T> w(weight.data(), s.out_channels, K);

#pragma omp parallel num_threads(max_threads())
  {
    std::vector<T> col;
#pragma omp for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int b = job / ntiles;
      const int oy0 = (job % ntiles) * rows;
      const int oy1 = std::min(ho, oy0 + rows);
      const int nt = (oy1 - oy0) * wo;
      col.resize(static_cast<std::size_t>(K) * nt);
      im2col_rows(s, input.data() + b * in_stride, oy0, oy1, 0, s.in_channels, col.data());
      StridedMap<T> out(output.data() + static_cast<std::size_t>(b) * s.out_channels * P +
                            static_cast<std::size_t>(oy0) * wo,
                        s.out_channels, nt, Eigen::OuterStride<>(static_cast<Eigen::Index>(P)));
      out.noalias() = w * ConstMatMap<T>(col.data(), K, nt);
    }
  }
}

template <typename T>
void conv_backward_input(const ConvShape& s, std::span<const T> grad_output,
                         std::span<const T> weight, std::span<T> grad_input) {
  check_sizes(s, grad_input.size(), weight.size(), grad_output.size());
  const int kk = s.kernel * s.kernel;
  const int K = s.in_channels * kk;
  const int ho = s.out_height(), wo = s.out_width();
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t in_stride = static_cast<std::size_t>(s.in_channels) * s.in_height * s.in_width;
  const int cb = std::min(s.in_channels, kChannelBlock);
  const int nblocks = (s.in_channels + cb - 1) / cb;
  const int rows = tile_rows(s, cb * kk);
  const int jobs = s.batch * nblocks;
  ConstMatMap<T> w(weight.data(), s.out_channels, K);

#pragma omp parallel num_threads(max_threads())
  {
    std::vector<T> col;
#pragma omp for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int b = job / nblocks;
      const int c0 = (job % nblocks) * cb;
      const int c1 = std::min(s.in_channels, c0 + cb);
      const int ck = (c1 - c0) * kk;
      const auto wt = w.middleCols(c0 * kk, ck).transpose();
      for (int oy0 = 0; oy0 < ho; oy0 += rows) {
        const int oy1 = std::min(ho, oy0 + rows);
        const int nt = (oy1 - oy0) * wo;
        col.resize(static_cast<std::size_t>(ck) * nt);
        ConstStridedMap<T> gout(grad_output.data() + static_cast<std::size_t>(b) * s.out_channels * P +
                                    static_cast<std::size_t>(oy0) * wo,
                                s.out_channels, nt, Eigen::OuterStride<>(static_cast<Eigen::Index>(P)));
        MatMap<T>(col.data(), ck, nt).noalias() = wt * gout;
        col2im_rows(s, col.data(), oy0, oy1, c0, c1, grad_input.data() + b * in_stride);
      }
    }
  }
}

template <typename T>
void conv_backward_weight(const ConvShape& s, std::span<const T> input,
                          std::span<const T> grad_output, std::span<T> grad_weight) {
  check_sizes(s, input.size(), grad_weight.size(), grad_output.size());
  const int kk = s.kernel * s.kernel;
  const int K = s.in_channels * kk;
  const int ho = s.out_height(), wo = s.out_width();
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t in_stride = static_cast<std::size_t>(s.in_channels) * s.in_height * s.in_width;
  const int cb = std::min(s.in_channels, kChannelBlock);
  const int nblocks = (s.in_channels + cb - 1) / cb;
  const int rows = tile_rows(s, cb * kk);

#pragma omp parallel num_threads(max_threads())
  {
    std::vector<T> col;
#pragma omp for schedule(static)
    for (int blk = 0; blk < nblocks; ++blk) {
      const int c0 = blk * cb;
      const int c1 = std::min(s.in_channels, c0 + cb);
      const int ck = (c1 - c0) * kk;
      StridedMap<T> gw(grad_weight.data() + static_cast<std::size_t>(c0) * kk, s.out_channels, ck,
                       Eigen::OuterStride<>(K));
      for (int b = 0; b < s.batch; ++b) {
        for (int oy0 = 0; oy0 < ho; oy0 += rows) {
          const int oy1 = std::min(ho, oy0 + rows);
          const int nt = (oy1 - oy0) * wo;
          col.resize(static_cast<std::size_t>(ck) * nt);
          im2col_rows(s, input.data() + b * in_stride, oy0, oy1, c0, c1, col.data());
          ConstStridedMap<T> gout(grad_output.data() + static_cast<std::size_t>(b) * s.out_channels * P +
                                      static_cast<std::size_t>(oy0) * wo,
                                  s.out_channels, nt, Eigen::OuterStride<>(static_cast<Eigen::Index>(P)));
          gw.noalias() += gout * ConstMatMap<T>(col.data(), ck, nt).transpose();
        }
      }
    }
  }
}

template <typename T>
void instance_norm_forward(const NormShape& s, std::span<const T> input, std::span<const T> gamma,
                           std::span<const T> beta, T epsilon, std::span<T> output,
                           std::span<T> normalized, std::span<T> inv_std) {
  const int planes = s.batch * s.channels;
  const std::size_t P = static_cast<std::size_t>(s.pixels);
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int bc = 0; bc < planes; ++bc) {
    const int c = bc % s.channels;
    const T* x = input.data() + bc * P;
    double mean = 0.0;
    for (std::size_t i = 0; i < P; ++i) mean += x[i];
    mean /= static_cast<double>(P);
    double var = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const double d = x[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(P);
    const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(epsilon)));
    inv_std[bc] = is;
    T* xh = normalized.data() + bc * P;
    T* y = output.data() + bc * P;
    const T m = static_cast<T>(mean);
    for (std::size_t i = 0; i < P; ++i) {
      xh[i] = (x[i] - m) * is;
      y[i] = gamma[c] * xh[i] + beta[c];
    }
  }
}

template <typename T>
void instance_norm_backward(const NormShape& s, std::span<const T> normalized,
                            std::span<const T> inv_std, std::span<const T> gamma,
                            std::span<const T> grad_output, std::span<T> grad_input,
                            std::span<T> grad_gamma, std::span<T> grad_beta) {
  const std::size_t P = static_cast<std::size_t>(s.pixels);
  const double inv_p = 1.0 / static_cast<double>(P);
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int c = 0; c < s.channels; ++c) {
    double dgamma = 0, dbeta = 0;
    for (int b = 0; b < s.batch; ++b) {
      const std::size_t bc = static_cast<std::size_t>(b) * s.channels + c;
      const T* xh = normalized.data() + bc * P;
      const T* dy = grad_output.data() + bc * P;
      double sum_dy = 0, sum_dy_xh = 0;
      for (std::size_t i = 0; i < P; ++i) {
        sum_dy += dy[i];
        sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
      }
      dgamma += sum_dy_xh;
      dbeta += sum_dy;
      if (!grad_input.empty()) {
        T* dx = grad_input.data() + bc * P;
        const double scale = static_cast<double>(gamma[c]) * inv_std[bc];
        const double mean_dy = inv_p * sum_dy, mean_dy_xh = inv_p * sum_dy_xh;
        for (std::size_t i = 0; i < P; ++i) {
          dx[i] += static_cast<T>(scale * (dy[i] - mean_dy - xh[i] * mean_dy_xh));
        }
      }
    }
    if (!grad_gamma.empty()) grad_gamma[c] += static_cast<T>(dgamma);
    if (!grad_beta.empty()) grad_beta[c] += static_cast<T>(dbeta);
  }
}

namespace reference {

template <typename T>
void conv_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                  std::span<T> output) {
  check_sizes(s, input.size(), weight.size(), output.size());
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  for (int b = 0; b < s.batch; ++b)
    for (int co = 0; co < s.out_channels; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          T acc = 0;
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const T x = input[((static_cast<std::size_t>(b) * s.in_channels + ci) * s.in_height +
                                   oy * s.stride + ky) * s.in_width + ox * s.stride + kx];
                acc += weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * k + ky) * k + kx] * x;
              }
          output[((static_cast<std::size_t>(b) * s.out_channels + co) * ho + oy) * wo + ox] = acc;
        }
}

template <typename T>
void conv_backward_input(const ConvShape& s, std::span<const T> grad_output,
                         std::span<const T> weight, std::span<T> grad_input) {
  check_sizes(s, grad_input.size(), weight.size(), grad_output.size());
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  for (int b = 0; b < s.batch; ++b)
    for (int co = 0; co < s.out_channels; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const T g = grad_output[((static_cast<std::size_t>(b) * s.out_channels + co) * ho + oy) * wo + ox];
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                grad_input[((static_cast<std::size_t>(b) * s.in_channels + ci) * s.in_height +
                            oy * s.stride + ky) * s.in_width + ox * s.stride + kx] +=
                    weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * k + ky) * k + kx] * g;
              }
        }
}

template <typename T>
void conv_backward_weight(const ConvShape& s, std::span<const T> input,
                          std::span<const T> grad_output, std::span<T> grad_weight) {
  check_sizes(s, input.size(), grad_weight.size(), grad_output.size());
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  for (int b = 0; b < s.batch; ++b)
    for (int co = 0; co < s.out_channels; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const T g = grad_output[((static_cast<std::size_t>(b) * s.out_channels + co) * ho + oy) * wo + ox];
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                grad_weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * k + ky) * k + kx] +=
                    g * input[((static_cast<std::size_t>(b) * s.in_channels + ci) * s.in_height +
                               oy * s.stride + ky) * s.in_width + ox * s.stride + kx];
              }
        }
}

template <typename T>
void instance_norm_forward(const NormShape& s, std::span<const T> input, std::span<const T> gamma,
                           std::span<const T> beta, T epsilon, std::span<T> output,
                           std::span<T> normalized, std::span<T> inv_std) {
  const std::size_t P = static_cast<std::size_t>(s.pixels);
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c) {
      const std::size_t bc = static_cast<std::size_t>(b) * s.channels + c;
      double mean = 0.0;
      for (std::size_t i = 0; i < P; ++i) mean += input[bc * P + i];
      mean /= static_cast<double>(P);
      double var = 0.0;
      for (std::size_t i = 0; i < P; ++i) var += (input[bc * P + i] - mean) * (input[bc * P + i] - mean);
      var /= static_cast<double>(P);
      inv_std[bc] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(epsilon)));
      for (std::size_t i = 0; i < P; ++i) {
        normalized[bc * P + i] = (input[bc * P + i] - static_cast<T>(mean)) * inv_std[bc];
        output[bc * P + i] = gamma[c] * normalized[bc * P + i] + beta[c];
      }
    }
}

template <typename T>
void instance_norm_backward(const NormShape& s, std::span<const T> normalized,
                            std::span<const T> inv_std, std::span<const T> gamma,
                            std::span<const T> grad_output, std::span<T> grad_input,
                            std::span<T> grad_gamma, std::span<T> grad_beta) {
  const std::size_t P = static_cast<std::size_t>(s.pixels);
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c) {
      const std::size_t bc = static_cast<std::size_t>(b) * s.channels + c;
      T sum_dy = 0, sum_dy_xh = 0;
      for (std::size_t i = 0; i < P; ++i) {
        sum_dy += grad_output[bc * P + i];
        sum_dy_xh += grad_output[bc * P + i] * normalized[bc * P + i];
      }
      if (!grad_gamma.empty()) grad_gamma[c] += sum_dy_xh;
      if (!grad_beta.empty()) grad_beta[c] += sum_dy;
      if (grad_input.empty()) continue;
      for (std::size_t i = 0; i < P; ++i) {
        grad_input[bc * P + i] +=
            gamma[c] * inv_std[bc] / static_cast<T>(P) *
            (static_cast<T>(P) * grad_output[bc * P + i] - sum_dy - normalized[bc * P + i] * sum_dy_xh);
      }
    }
}

}  // namespace reference

}  // namespace svbrdf::kernels

#define SVBRDF_INSTANTIATE_KERNELS(NS, T)                                                          \
  template void NS::conv_forward<T>(const svbrdf::kernels::ConvShape&, std::span<const T>, std::span<const T>,      \
                                    std::span<T>);                                                 \
  template void NS::conv_backward_input<T>(const svbrdf::kernels::ConvShape&, std::span<const T>,                   \
                                           std::span<const T>, std::span<T>);                      \
  template void NS::conv_backward_weight<T>(const svbrdf::kernels::ConvShape&, std::span<const T>,                  \
                                            std::span<const T>, std::span<T>);                     \
  template void NS::instance_norm_forward<T>(const svbrdf::kernels::NormShape&, std::span<const T>,                 \
                                             std::span<const T>, std::span<const T>, T,            \
                                             std::span<T>, std::span<T>, std::span<T>);            \
  template void NS::instance_norm_backward<T>(const svbrdf::kernels::NormShape&, std::span<const T>,                \
                                              std::span<const T>, std::span<const T>,              \
                                              std::span<const T>, std::span<T>, std::span<T>,      \
                                              std::span<T>);

SVBRDF_INSTANTIATE_KERNELS(svbrdf::kernels, float)
SVBRDF_INSTANTIATE_KERNELS(svbrdf::kernels, double)
SVBRDF_INSTANTIATE_KERNELS(svbrdf::kernels::reference, float)
SVBRDF_INSTANTIATE_KERNELS(svbrdf::kernels::reference, double)

#undef SVBRDF_INSTANTIATE_KERNELS

