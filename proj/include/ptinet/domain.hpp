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

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptinet/tensor.hpp"

namespace ptinet {

// Center-based box in image-plane pixels.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  bool operator==(const BoundingBox&) const = default;
};

// Per-frame box difference, pixels/frame.
struct BoxVelocity {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  bool operator==(const BoxVelocity&) const = default;
};

inline BoxVelocity operator-(const BoundingBox& a, const BoundingBox& b) {
  return {a.x - b.x, a.y - b.y, a.w - b.w, a.h - b.h};
}
inline BoundingBox operator+(const BoundingBox& a, const BoxVelocity& v) {
  return {a.x + v.dx, a.y + v.dy, a.w + v.dw, a.h + v.dh};
}

struct ImageDims {
  int height = 240;
  int width = 420;

  bool operator==(const ImageDims&) const = default;
};

enum class Normalization { kNone, kScaleToUnit };

struct PastTrajectory {
  std::vector<BoundingBox> positions;
  std::vector<BoxVelocity> velocities;

  bool operator==(const PastTrajectory&) const = default;
};

struct LocalContext {
  std::vector<double> pedestrian_attrs;
  std::vector<std::vector<double>> behavior_attrs;
  // Absent for datasets without scene annotations.
  std::optional<std::vector<std::vector<double>>> scene_attrs;

  bool operator==(const LocalContext&) const = default;
};

// Frames are shared, immutable arrays: windows that overlap in time point at
// the same decoded frame. Both sequences empty means "not loaded".
using FramePtr = std::shared_ptr<const Tensor>;

struct GlobalContext {
  std::vector<FramePtr> images;  // m arrays [3,H,W], values in [0,1]
  std::vector<FramePtr> flows;   // m-1 arrays [2,H,W], (u, v) in pixels of H,W

  bool loaded() const { return !images.empty() || !flows.empty(); }
};

struct PedestrianSample {
  PastTrajectory past;
  LocalContext local;
  GlobalContext global_ctx;
  std::vector<BoundingBox> future_boxes;
  std::vector<int> future_intentions;

  std::string pedestrian_id;
  std::string video_id;
  int anchor_frame = 0;   // frame number of the last observed frame
  int anchor_index = 0;   // position of that frame within the source track
  int track_length = 0;
  ImageDims image_dims;   // source frame size the boxes refer to
  Normalization normalization = Normalization::kNone;
};

struct PredictionOutput {
  std::vector<BoundingBox> boxes;
  std::vector<double> intention_probs;
};

std::vector<BoxVelocity> compute_velocities(std::span<const BoundingBox> positions);

struct ValidationResult {
  bool ok = true;
  std::string reason;

  explicit operator bool() const { return ok; }
  static ValidationResult accept() { return {}; }
  static ValidationResult reject(std::string why) { return {false, std::move(why)}; }
};

bool box_is_valid(const BoundingBox& b);

ValidationResult validate_sample(const PedestrianSample& sample, int m, int n);
ValidationResult validate_prediction(const PredictionOutput& prediction, int n);

}  // namespace ptinet
