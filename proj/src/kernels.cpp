// Copyright 2026 The PTINet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ptinet/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ptinet/errors.hpp"
#include "ptinet/tensor.hpp"

namespace ptinet::kernels {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void check_geometry(const ConvGeometry& g) {
  if (g.in_channels <= 0 || g.out_channels <= 0 || g.kernel <= 0 || g.stride <= 0 ||
      g.out_height <= 0 || g.out_width <= 0) {
    throw ShapeError("invalid convolution geometry");
  }
}

// col has shape [C*k*k, Ho*Wo].
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const int k = g.kernel;
  const std::size_t pixels = g.output_pixels();
  for (int c = 0; c < g.in_channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * pixels;
        for (int oi = 0; oi < g.out_height; ++oi) {
          const int ii = oi * g.stride + ki - g.pad_top;
          double* out = row + static_cast<std::size_t>(oi) * g.out_width;
          if (ii < 0 || ii >= g.in_height) {
            std::fill(out, out + g.out_width, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ii) * g.in_width;
          for (int oj = 0; oj < g.out_width; ++oj) {
            const int jj = oj * g.stride + kj - g.pad_left;
            out[oj] = (jj >= 0 && jj < g.in_width) ? src[jj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* dx) {
  const int k = g.kernel;
  const std::size_t pixels = g.output_pixels();
  for (int c = 0; c < g.in_channels; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * pixels;
        for (int oi = 0; oi < g.out_height; ++oi) {
          const int ii = oi * g.stride + ki - g.pad_top;
          if (ii < 0 || ii >= g.in_height) continue;
          double* dst = plane + static_cast<std::size_t>(ii) * g.in_width;
          const double* src = row + static_cast<std::size_t>(oi) * g.out_width;
          for (int oj = 0; oj < g.out_width; ++oj) {
            const int jj = oj * g.stride + kj - g.pad_left;
            if (jj >= 0 && jj < g.in_width) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

int same_output_extent(int input, int stride) { return (input + stride - 1) / stride; }

ConvGeometry ConvGeometry::same(int in_channels, int in_height, int in_width, int out_channels,
                                int kernel, int stride) {
  ConvGeometry g;
  g.in_channels = in_channels;
  g.in_height = in_height;
  g.in_width = in_width;
  g.out_channels = out_channels;
  g.kernel = kernel;
  g.stride = stride;
  g.out_height = same_output_extent(in_height, stride);
  g.out_width = same_output_extent(in_width, stride);
  const int pad_h = std::max((g.out_height - 1) * stride + kernel - in_height, 0);
  const int pad_w = std::max((g.out_width - 1) * stride + kernel - in_width, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

ConvGeometry ConvGeometry::valid(int in_channels, int in_height, int in_width, int out_channels,
                                 int kernel, int stride) {
  ConvGeometry g;
  g.in_channels = in_channels;
  g.in_height = in_height;
  g.in_width = in_width;
  g.out_channels = out_channels;
  g.kernel = kernel;
  g.stride = stride;
  g.out_height = (in_height - kernel) / stride + 1;
  g.out_width = (in_width - kernel) / stride + 1;
  return g;
}

PoolGeometry PoolGeometry::floor(int channels, int in_height, int in_width, int window) {
  PoolGeometry g;
  g.channels = channels;
  g.in_height = in_height;
  g.in_width = in_width;
  g.window = window;
  g.out_height = in_height / window;
  g.out_width = in_width / window;
  if (g.out_height <= 0 || g.out_width <= 0) {
    throw ShapeError("max pool window " + std::to_string(window) + " does not fit " +
                     std::to_string(in_height) + "x" + std::to_string(in_width));
  }
  return g;
}

void conv2d_forward(const ConvGeometry& g, int batch, const double* x, const double* w,
                    const double* bias, double* y) {
  check_geometry(g);
  const auto patch = static_cast<Eigen::Index>(g.patch_size());
  const auto pixels = static_cast<Eigen::Index>(g.output_pixels());
  ConstMap weights(w, g.out_channels, patch);
#pragma omp parallel
  {
    AlignedBuffer col(g.patch_size() * g.output_pixels());
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      im2col(g, x + b * g.input_size(), col.data());
      MutMap out(y + b * g.output_size(), g.out_channels, pixels);
      out.noalias() = weights * ConstMap(col.data(), patch, pixels);
      if (bias) {
        for (int o = 0; o < g.out_channels; ++o) out.row(o).array() += bias[o];
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, int batch, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* dbias) {
  check_geometry(g);
  const auto patch = static_cast<Eigen::Index>(g.patch_size());
  const auto pixels = static_cast<Eigen::Index>(g.output_pixels());
  ConstMap weights(w, g.out_channels, patch);
#pragma omp parallel
  {
    AlignedBuffer col(g.patch_size() * g.output_pixels());
    RowMatrix dw_local;
    if (dw) dw_local = RowMatrix::Zero(g.out_channels, patch);
    std::vector<double> db_local(dbias ? g.out_channels : 0, 0.0);
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      ConstMap grad_out(dy + b * g.output_size(), g.out_channels, pixels);
      if (dw) {
        im2col(g, x + b * g.input_size(), col.data());
        dw_local.noalias() += grad_out * ConstMap(col.data(), patch, pixels).transpose();
      }
      if (dbias) {
        for (int o = 0; o < g.out_channels; ++o) db_local[o] += grad_out.row(o).sum();
      }
      if (dx) {
        MutMap dcol(col.data(), patch, pixels);
        dcol.noalias() = weights.transpose() * grad_out;
        col2im_add(g, col.data(), dx + b * g.input_size());
      }
    }
#pragma omp critical
    {
      if (dw) MutMap(dw, g.out_channels, patch) += dw_local;
      if (dbias) {
        for (int o = 0; o < g.out_channels; ++o) dbias[o] += db_local[o];
      }
    }
  }
}

void max_pool2d_forward(const PoolGeometry& g, int batch, const double* x, double* y,
                        int* argmax) {
  const int planes = batch * g.channels;
  const std::size_t in_plane = static_cast<std::size_t>(g.in_height) * g.in_width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int c = p % g.channels;
    const double* src = x + p * in_plane;
    double* dst = y + p * out_plane;
    int* arg = argmax + p * out_plane;
    for (int oi = 0; oi < g.out_height; ++oi) {
      for (int oj = 0; oj < g.out_width; ++oj) {
        double best = -std::numeric_limits<double>::infinity();
        int best_at = 0;
        for (int di = 0; di < g.window; ++di) {
          const int ii = oi * g.window + di;
          for (int dj = 0; dj < g.window; ++dj) {
            const int jj = oj * g.window + dj;
            const double v = src[ii * g.in_width + jj];
            if (v > best) {
              best = v;
              best_at = ii * g.in_width + jj;
            }
          }
        }
        dst[oi * g.out_width + oj] = best;
        arg[oi * g.out_width + oj] = c * static_cast<int>(in_plane) + best_at;
      }
    }
  }
}

void max_pool2d_backward(const PoolGeometry& g, int batch, const int* argmax, const double* dy,
                         double* dx) {
  const std::size_t in_sample = static_cast<std::size_t>(g.channels) * g.in_height * g.in_width;
  const std::size_t out_sample = static_cast<std::size_t>(g.channels) * g.out_height * g.out_width;
  // Windows never overlap, so each input element receives at most one write.
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < out_sample; ++i) {
      dx[b * in_sample + argmax[b * out_sample + i]] += dy[b * out_sample + i];
    }
  }
}

void resize_bilinear(int channels, int in_height, int in_width, const double* x, int out_height,
                     int out_width, double* y) {
  const double sy = static_cast<double>(in_height) / out_height;
  const double sx = static_cast<double>(in_width) / out_width;
  std::vector<int> x0(out_width), x1(out_width);
  std::vector<double> fx(out_width);
  for (int j = 0; j < out_width; ++j) {
    double src = std::clamp((j + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_width - 1));
    x0[j] = static_cast<int>(std::floor(src));
    x1[j] = std::min(x0[j] + 1, in_width - 1);
    fx[j] = src - x0[j];
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < out_height; ++i) {
      const double* plane = x + static_cast<std::size_t>(c) * in_height * in_width;
      double src = std::clamp((i + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_height - 1));
      const int y0 = static_cast<int>(std::floor(src));
      const int y1 = std::min(y0 + 1, in_height - 1);
      const double fy = src - y0;
      const double* r0 = plane + static_cast<std::size_t>(y0) * in_width;
      const double* r1 = plane + static_cast<std::size_t>(y1) * in_width;
      double* out = y + (static_cast<std::size_t>(c) * out_height + i) * out_width;
      for (int j = 0; j < out_width; ++j) {
        const double top = r0[x0[j]] + (r0[x1[j]] - r0[x0[j]]) * fx[j];
        const double bottom = r1[x0[j]] + (r1[x1[j]] - r1[x0[j]]) * fx[j];
        out[j] = top + (bottom - top) * fy;
      }
    }
  }
}

namespace reference {

void conv2d_forward(const ConvGeometry& g, int batch, const double* x, const double* w,
                    const double* bias, double* y) {
  check_geometry(g);
  const int k = g.kernel;
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < g.out_channels; ++o) {
      for (int oi = 0; oi < g.out_height; ++oi) {
        for (int oj = 0; oj < g.out_width; ++oj) {
          double acc = bias ? bias[o] : 0.0;
          for (int c = 0; c < g.in_channels; ++c) {
            for (int ki = 0; ki < k; ++ki) {
              const int ii = oi * g.stride + ki - g.pad_top;
              if (ii < 0 || ii >= g.in_height) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int jj = oj * g.stride + kj - g.pad_left;
                if (jj < 0 || jj >= g.in_width) continue;
                acc += w[((o * g.in_channels + c) * k + ki) * k + kj] *
                       x[((static_cast<std::size_t>(b) * g.in_channels + c) * g.in_height + ii) *
                             g.in_width +
                         jj];
              }
            }
          }
          y[((static_cast<std::size_t>(b) * g.out_channels + o) * g.out_height + oi) *
                g.out_width +
            oj] = acc;
        }
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, int batch, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* dbias) {
  check_geometry(g);
  const int k = g.kernel;
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < g.out_channels; ++o) {
      for (int oi = 0; oi < g.out_height; ++oi) {
        for (int oj = 0; oj < g.out_width; ++oj) {
          const double grad =
              dy[((static_cast<std::size_t>(b) * g.out_channels + o) * g.out_height + oi) *
                     g.out_width +
                 oj];
          if (dbias) dbias[o] += grad;
          for (int c = 0; c < g.in_channels; ++c) {
            for (int ki = 0; ki < k; ++ki) {
              const int ii = oi * g.stride + ki - g.pad_top;
              if (ii < 0 || ii >= g.in_height) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int jj = oj * g.stride + kj - g.pad_left;
                if (jj < 0 || jj >= g.in_width) continue;
                const std::size_t xi =
                    ((static_cast<std::size_t>(b) * g.in_channels + c) * g.in_height + ii) *
                        g.in_width +
                    jj;
                const std::size_t wi = ((o * g.in_channels + c) * k + ki) * k + kj;
                if (dw) dw[wi] += grad * x[xi];
                if (dx) dx[xi] += grad * w[wi];
              }
            }
          }
        }
      }
    }
  }
}

void max_pool2d_forward(const PoolGeometry& g, int batch, const double* x, double* y,
                        int* argmax) {
  const int plane = g.in_height * g.in_width;
  std::size_t out = 0;
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < g.channels; ++c) {
      const double* src = x + (static_cast<std::size_t>(b) * g.channels + c) * plane;
      for (int oi = 0; oi < g.out_height; ++oi) {
        for (int oj = 0; oj < g.out_width; ++oj, ++out) {
          double best = -std::numeric_limits<double>::infinity();
          int best_at = 0;
          for (int di = 0; di < g.window; ++di) {
            for (int dj = 0; dj < g.window; ++dj) {
              const int at = (oi * g.window + di) * g.in_width + oj * g.window + dj;
              if (src[at] > best) {
                best = src[at];
                best_at = at;
              }
            }
          }
          y[out] = best;
          argmax[out] = c * plane + best_at;
        }
      }
    }
  }
}

void resize_bilinear(int channels, int in_height, int in_width, const double* x, int out_height,
                     int out_width, double* y) {
  auto sample = [&](const double* plane, double sy, double sx) {
    sy = std::clamp(sy, 0.0, static_cast<double>(in_height - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(in_width - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, in_height - 1);
    const int x1 = std::min(x0 + 1, in_width - 1);
    const double ty = sy - y0;
    const double tx = sx - x0;
    const double v00 = plane[y0 * in_width + x0];
    const double v01 = plane[y0 * in_width + x1];
    const double v10 = plane[y1 * in_width + x0];
    const double v11 = plane[y1 * in_width + x1];
    return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
  };
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * in_height * in_width;
    for (int i = 0; i < out_height; ++i) {
      for (int j = 0; j < out_width; ++j) {
        const double sy = (i + 0.5) * in_height / out_height - 0.5;
        const double sx = (j + 0.5) * in_width / out_width - 0.5;
        y[(static_cast<std::size_t>(c) * out_height + i) * out_width + j] = sample(plane, sy, sx);
      }
    }
  }
}

}  // namespace reference

}  // namespace ptinet::kernels
