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

// Iterative LSTM decoders seeded with the fused feature: one rolls out future
// boxes, the other per-step crossing probabilities.

#include <array>

#include "ptinet/encoders.hpp"

namespace ptinet {

// Per-component affine maps between pixels and the standardized units the
// networks see. Identity by default.
struct BoxScaling {
  std::array<double, 4> pos_mean{0, 0, 0, 0};
  std::array<double, 4> pos_std{1, 1, 1, 1};
  std::array<double, 4> vel_mean{0, 0, 0, 0};
  std::array<double, 4> vel_std{1, 1, 1, 1};

  bool operator==(const BoxScaling&) const = default;
};

struct DecoderConfig {
  // Head emits the standardized box itself instead of an offset.
  bool absolute_position = false;
  // Intention decoder consumes the trajectory decoder's boxes after step 1.
  bool couple_intention = false;

  bool operator==(const DecoderConfig&) const = default;
};

struct DecoderParams {
  LstmLayer trajectory;
  Var w_o, b_o;    // [hidden, 4], [4]
  LstmLayer intention;
  Var w_oi, b_oi;  // [hidden, 2], [2]
  int hidden = 0;
};

DecoderParams add_decoders(ParamStore& store, int hidden);

// x * scale + shift per column of a [B, 4] box matrix.
Var affine_columns(const Var& x, const std::array<double, 4>& scale,
                   const std::array<double, 4>& shift);
Var standardize_boxes(const Var& boxes, const BoxScaling& s);

// fused [B, hidden], last_box [B, 4] in pixels. Returns [B, 4n] pixels, step j
// in columns 4j .. 4j+3.
Var decode_trajectory(const DecoderParams& params, const Var& fused, const Tensor& last_box, int n,
                      const BoxScaling& scaling, const DecoderConfig& config);

// Returns [B, n] probabilities of the crossing class. predicted_boxes, when
// defined, is the trajectory decoder's [B, 4n] output and is used only with
// couple_intention.
Var decode_intention(const DecoderParams& params, const Var& fused, const Tensor& last_box, int n,
                     const BoxScaling& scaling, const DecoderConfig& config,
                     const Var& predicted_boxes = Var());

// Two logits [B, 2] -> crossing probability [B, 1].
Var crossing_probability(const Var& logits);

}  // namespace ptinet
