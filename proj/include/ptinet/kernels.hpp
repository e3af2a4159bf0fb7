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

#pragma once

// Data-parallel inner kernels. Each kernel has an OpenMP implementation used
// by the model and a plain serial implementation in `reference::` kept as the
// ground truth for tests and the benchmark.

#include <cstddef>
#include <vector>

namespace ptinet::kernels {

struct ConvGeometry {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad_top = 0;
  int pad_left = 0;
  int out_height = 0;
  int out_width = 0;

  // "Same" padding: output = ceil(input / stride), padding split with the
  // extra row/column on the bottom/right.
  static ConvGeometry same(int in_channels, int in_height, int in_width, int out_channels,
                           int kernel, int stride);
  // No padding, floor output size.
  static ConvGeometry valid(int in_channels, int in_height, int in_width, int out_channels,
                            int kernel, int stride);

  std::size_t input_size() const {
    return static_cast<std::size_t>(in_channels) * in_height * in_width;
  }
  std::size_t output_size() const {
    return static_cast<std::size_t>(out_channels) * out_height * out_width;
  }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  std::size_t patch_size() const {
    return static_cast<std::size_t>(in_channels) * kernel * kernel;
  }
  std::size_t output_pixels() const {
    return static_cast<std::size_t>(out_height) * out_width;
  }
};

int same_output_extent(int input, int stride);

// y[b] = conv(x[b], w) (+ bias). `bias` may be null. Layouts: x [B,C,H,W],
// w [O,C,k,k], y [B,O,Ho,Wo]. y is overwritten.
void conv2d_forward(const ConvGeometry& g, int batch, const double* x, const double* w,
                    const double* bias, double* y);

// Accumulates into dx, dw, dbias (each may be null).
void conv2d_backward(const ConvGeometry& g, int batch, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* dbias);

struct PoolGeometry {
  int channels = 0;
  int in_height = 0;
  int in_width = 0;
  int window = 2;
  int out_height = 0;
  int out_width = 0;

  // Non-overlapping window, floor division.
  static PoolGeometry floor(int channels, int in_height, int in_width, int window);
};

// argmax receives, per output element, the flat input offset within the
// sample that won the max.
void max_pool2d_forward(const PoolGeometry& g, int batch, const double* x, double* y,
                        int* argmax);
void max_pool2d_backward(const PoolGeometry& g, int batch, const int* argmax, const double* dy,
                         double* dx);

// Bilinear resize with half-pixel centers, per channel plane.
void resize_bilinear(int channels, int in_height, int in_width, const double* x, int out_height,
                     int out_width, double* y);

namespace reference {

void conv2d_forward(const ConvGeometry& g, int batch, const double* x, const double* w,
                    const double* bias, double* y);
void conv2d_backward(const ConvGeometry& g, int batch, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* dbias);
void max_pool2d_forward(const PoolGeometry& g, int batch, const double* x, double* y,
                        int* argmax);
void resize_bilinear(int channels, int in_height, int in_width, const double* x, int out_height,
                     int out_width, double* y);

}  // namespace reference

}  // namespace ptinet::kernels
