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

#include "ptinet/domain.hpp"

#include <algorithm>
#include <cmath>

#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

bool finite(const BoundingBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h);
}

bool finite(const BoxVelocity& v) {
  return std::isfinite(v.dx) && std::isfinite(v.dy) && std::isfinite(v.dw) && std::isfinite(v.dh);
}

// Velocities of normalized samples are divided separately from positions, so
// the difference identity holds only up to rounding.
bool close(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

bool is_binary(const std::vector<double>& v) {
  for (double x : v) {
    if (x != 0.0 && x != 1.0) return false;
  }
  return true;
}

ValidationResult check_frames(const std::vector<FramePtr>& frames, int channels, int& height,
                              int& width) {
  for (const FramePtr& f : frames) {
    if (!f || f->rank() != 3 || f->dim(0) != channels) {
      return ValidationResult::reject("global context shape mismatch");
    }
    if (height < 0) {
      height = f->dim(1);
      width = f->dim(2);
    } else if (f->dim(1) != height || f->dim(2) != width) {
      return ValidationResult::reject("global context shape mismatch");
    }
    if (!all_finite(*f)) return ValidationResult::reject("non-finite global context");
  }
  return ValidationResult::accept();
}

}  // namespace

std::vector<BoxVelocity> compute_velocities(std::span<const BoundingBox> positions) {
  if (positions.size() < 2) {
    throw InvalidSequenceError("velocities need at least 2 positions, got " +
                               std::to_string(positions.size()));
  }
  std::vector<BoxVelocity> out(positions.size());
  for (std::size_t t = 1; t < positions.size(); ++t) out[t] = positions[t] - positions[t - 1];
  return out;
}

bool box_is_valid(const BoundingBox& b) { return finite(b) && b.w > 0.0 && b.h > 0.0; }

ValidationResult validate_sample(const PedestrianSample& s, int m, int n) {
  if (m < 2) return ValidationResult::reject("observation length below 2");
  if (n < 1) return ValidationResult::reject("prediction length below 1");

  const auto& past = s.past;
  if (static_cast<int>(past.positions.size()) != m ||
      static_cast<int>(past.velocities.size()) != m) {
    return ValidationResult::reject("past length mismatch");
  }
  for (const auto& b : past.positions) {
    if (!finite(b)) return ValidationResult::reject("non-finite box");
    if (!(b.w > 0.0 && b.h > 0.0)) return ValidationResult::reject("degenerate box");
  }
  for (const auto& v : past.velocities) {
    if (!finite(v)) return ValidationResult::reject("non-finite velocity");
  }
  if (past.velocities[0] != BoxVelocity{}) {
    return ValidationResult::reject("leading velocity not zero");
  }
  for (int t = 1; t < m; ++t) {
    const BoxVelocity expected = past.positions[t] - past.positions[t - 1];
    const BoxVelocity& got = past.velocities[t];
    if (!close(expected.dx, got.dx) || !close(expected.dy, got.dy) ||
        !close(expected.dw, got.dw) || !close(expected.dh, got.dh)) {
      return ValidationResult::reject("velocity does not match positions");
    }
  }

  const auto& local = s.local;
  if (static_cast<int>(local.behavior_attrs.size()) != m) {
    return ValidationResult::reject("behavior length mismatch");
  }
  for (const auto& b : local.behavior_attrs) {
    if (!is_binary(b)) return ValidationResult::reject("behavior not binary");
  }
  if (local.scene_attrs && static_cast<int>(local.scene_attrs->size()) != m) {
    return ValidationResult::reject("scene length mismatch");
  }

  const auto& g = s.global_ctx;
  if (g.loaded()) {
    if (static_cast<int>(g.images.size()) != m) {
      return ValidationResult::reject("image count mismatch");
    }
    if (g.flows.size() + 1 != g.images.size()) {
      return ValidationResult::reject("flow count mismatch");
    }
    int height = -1;
    int width = -1;
    if (auto r = check_frames(g.images, 3, height, width); !r) return r;
    if (auto r = check_frames(g.flows, 2, height, width); !r) return r;
  }

  if (static_cast<int>(s.future_boxes.size()) != n ||
      static_cast<int>(s.future_intentions.size()) != n) {
    return ValidationResult::reject("future length mismatch");
  }
  for (const auto& b : s.future_boxes) {
    if (!finite(b)) return ValidationResult::reject("non-finite box");
    if (!(b.w > 0.0 && b.h > 0.0)) return ValidationResult::reject("degenerate box");
  }
  for (int label : s.future_intentions) {
    if (label != 0 && label != 1) return ValidationResult::reject("intention label not binary");
  }
  if (s.anchor_index + n > s.track_length - 1) {
    return ValidationResult::reject("anchor exceeds track");
  }
  return ValidationResult::accept();
}

ValidationResult validate_prediction(const PredictionOutput& p, int n) {
  if (static_cast<int>(p.boxes.size()) != n || static_cast<int>(p.intention_probs.size()) != n) {
    return ValidationResult::reject("prediction length mismatch");
  }
  for (double q : p.intention_probs) {
    if (!(q >= 0.0 && q <= 1.0)) return ValidationResult::reject("probability out of range");
  }
  for (const auto& b : p.boxes) {
    if (!finite(b)) return ValidationResult::reject("non-finite box");
  }
  return ValidationResult::accept();
}

}  // namespace ptinet
