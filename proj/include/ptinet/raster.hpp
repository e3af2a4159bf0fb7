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

#include <array>
#include <filesystem>

#include "ptinet/domain.hpp"
#include "ptinet/tensor.hpp"

namespace ptinet::raster {

using Rgb = std::array<double, 3>;

// PNG frames are 8-bit RGB on disk and [3,H,W] tensors in [0,1] in memory.
Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& image);

Tensor blank(int height, int width, const Rgb& color);

// Pixel (i, j) is covered when its center lies inside [x0, x1) x [y0, y1).
void fill_rect(Tensor& image, double x0, double y0, double x1, double y1, const Rgb& color);
void fill_box(Tensor& image, const BoundingBox& box, const Rgb& color);
void outline_box(Tensor& image, const BoundingBox& box, const Rgb& color, int thickness = 1);
void dotted_polyline(Tensor& image, const std::vector<std::array<double, 2>>& points,
                     const Rgb& color, int period = 4);
void set_pixel(Tensor& image, int row, int col, const Rgb& color);
Rgb pixel(const Tensor& image, int row, int col);

}  // namespace ptinet::raster
