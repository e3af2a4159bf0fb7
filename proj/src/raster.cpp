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

#include "ptinet/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "ptinet/errors.hpp"

namespace ptinet::raster {

Tensor read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read image " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode image " + path.string() + ": " + msg);
  }
  const int h = static_cast<int>(img.height);
  const int w = static_cast<int>(img.width);
  Tensor out(Shape{3, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) out[c * plane + p] = buffer[p * 3 + c] / 255.0;
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_png expects [3,H,W], got " + shape_string(image.shape()));
  }
  const int h = image.dim(1);
  const int w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> buffer(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(image[c * plane + p], 0.0, 1.0);
      buffer[p * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write image " + path.string() + ": " + img.message);
  }
}

Tensor blank(int height, int width, const Rgb& color) {
  Tensor out(Shape{3, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < 3; ++c) std::fill_n(out.data() + c * plane, plane, color[c]);
  return out;
}

void set_pixel(Tensor& image, int row, int col, const Rgb& color) {
  const int h = image.dim(1);
  const int w = image.dim(2);
  if (row < 0 || row >= h || col < 0 || col >= w) return;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < 3; ++c) image[c * plane + static_cast<std::size_t>(row) * w + col] = color[c];
}

Rgb pixel(const Tensor& image, int row, int col) {
  const std::size_t plane = static_cast<std::size_t>(image.dim(1)) * image.dim(2);
  const std::size_t at = static_cast<std::size_t>(row) * image.dim(2) + col;
  return {image[at], image[plane + at], image[2 * plane + at]};
}

void fill_rect(Tensor& image, double x0, double y0, double x1, double y1, const Rgb& color) {
  const int h = image.dim(1);
  const int w = image.dim(2);
  const int c0 = std::max(0, static_cast<int>(std::ceil(x0 - 0.5)));
  const int c1 = std::min(w, static_cast<int>(std::ceil(x1 - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(y0 - 0.5)));
  const int r1 = std::min(h, static_cast<int>(std::ceil(y1 - 0.5)));
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) set_pixel(image, r, c, color);
  }
}

void fill_box(Tensor& image, const BoundingBox& b, const Rgb& color) {
  fill_rect(image, b.x - b.w / 2, b.y - b.h / 2, b.x + b.w / 2, b.y + b.h / 2, color);
}

void outline_box(Tensor& image, const BoundingBox& b, const Rgb& color, int thickness) {
  const int left = static_cast<int>(std::lround(b.x - b.w / 2));
  const int right = static_cast<int>(std::lround(b.x + b.w / 2));
  const int top = static_cast<int>(std::lround(b.y - b.h / 2));
  const int bottom = static_cast<int>(std::lround(b.y + b.h / 2));
  for (int t = 0; t < thickness; ++t) {
    for (int c = left; c <= right; ++c) {
      set_pixel(image, top + t, c, color);
      set_pixel(image, bottom - t, c, color);
    }
    for (int r = top; r <= bottom; ++r) {
      set_pixel(image, r, left + t, color);
      set_pixel(image, r, right - t, color);
    }
  }
}

void dotted_polyline(Tensor& image, const std::vector<std::array<double, 2>>& points,
                     const Rgb& color, int period) {
  int step = 0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double dx = points[k][0] - points[k - 1][0];
    const double dy = points[k][1] - points[k - 1][1];
    const int n = std::max(1, static_cast<int>(std::ceil(std::hypot(dx, dy))));
    for (int i = 0; i < n; ++i, ++step) {
      if (step % period >= period / 2) continue;
      const double t = static_cast<double>(i) / n;
      set_pixel(image, static_cast<int>(std::lround(points[k - 1][1] + t * dy)),
                static_cast<int>(std::lround(points[k - 1][0] + t * dx)), color);
    }
  }
}

}  // namespace ptinet::raster
