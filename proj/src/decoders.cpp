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

#include "ptinet/decoders.hpp"

#include <string>

#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

void check_inputs(const DecoderParams& p, const Var& fused, const Tensor& last_box, int n,
                  const char* what) {
  if (fused.value().rank() != 2 || fused.dim(1) != p.hidden) {
    throw ShapeError(std::string(what) + ": feature " + shape_string(fused.shape()) +
                     " does not match decoder width " + std::to_string(p.hidden));
  }
  if (last_box.rank() != 2 || last_box.dim(0) != fused.dim(0) || last_box.dim(1) != 4) {
    throw ShapeError(std::string(what) + ": last box " + shape_string(last_box.shape()));
  }
  if (n < 1) throw ShapeError(std::string(what) + ": horizon must be positive");
}

Tensor tiled(int rows, const std::array<double, 4>& v) {
  Tensor t(Shape{rows, 4});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < 4; ++c) t.at(r, c) = v[c];
  }
  return t;
}

}  // namespace

DecoderParams add_decoders(ParamStore& store, int hidden) {
  DecoderParams p;
  p.hidden = hidden;
  auto cell = [&](const std::string& prefix) {
    LstmLayer l;
    l.hidden = hidden;
    l.w = store.add(prefix + ".w", Shape{4 + hidden, 4 * hidden}, Init::fan_in(hidden));
    l.b = store.add(prefix + ".b", Shape{4 * hidden}, Init::zero());
    return l;
  };
  p.trajectory = cell("traj.cell");
  p.w_o = store.add("traj.out.w", Shape{hidden, 4}, Init::fan_in(hidden));
  p.b_o = store.add("traj.out.b", Shape{4}, Init::zero());
  p.intention = cell("int.cell");
  p.w_oi = store.add("int.out.w", Shape{hidden, 2}, Init::fan_in(hidden));
  p.b_oi = store.add("int.out.b", Shape{2}, Init::zero());
  return p;
}

Var affine_columns(const Var& x, const std::array<double, 4>& scale,
                   const std::array<double, 4>& shift) {
  return add_row(x * constant(tiled(x.dim(0), scale)),
                 constant(Tensor(Shape{4}, std::vector<double>(shift.begin(), shift.end()))));
}

Var standardize_boxes(const Var& boxes, const BoxScaling& s) {
  std::array<double, 4> inv{}, shift{};
  for (int c = 0; c < 4; ++c) {
    inv[c] = 1.0 / s.pos_std[c];
    shift[c] = -s.pos_mean[c] * inv[c];
  }
  return affine_columns(boxes, inv, shift);
}

Var crossing_probability(const Var& logits) { return slice_columns(softmax_rows(logits), 1, 1); }

Var decode_trajectory(const DecoderParams& p, const Var& fused, const Tensor& last_box, int n,
                      const BoxScaling& scaling, const DecoderConfig& config) {
  check_inputs(p, fused, last_box, n, "decode_trajectory");
  const int batch = fused.dim(0);
  LstmState state{fused, constant(Tensor(Shape{batch, p.hidden}))};
  Var prev = constant(last_box);
  std::vector<Var> steps;
  for (int j = 0; j < n; ++j) {
    state = lstm_cell(p.trajectory, standardize_boxes(prev, scaling), state);
    const Var out = linear(state.h, p.w_o, p.b_o);
    prev = config.absolute_position ? affine_columns(out, scaling.pos_std, scaling.pos_mean)
                                    : prev + affine_columns(out, scaling.vel_std, scaling.vel_mean);
    steps.push_back(prev);
  }
  return concat_columns(steps);
}

Var decode_intention(const DecoderParams& p, const Var& fused, const Tensor& last_box, int n,
                     const BoxScaling& scaling, const DecoderConfig& config,
                     const Var& predicted_boxes) {
  check_inputs(p, fused, last_box, n, "decode_intention");
  const bool coupled = config.couple_intention && predicted_boxes.defined();
  if (coupled && (predicted_boxes.dim(0) != fused.dim(0) || predicted_boxes.dim(1) < 4 * (n - 1))) {
    throw ShapeError("decode_intention: predicted boxes " + shape_string(predicted_boxes.shape()));
  }
  const int batch = fused.dim(0);
  LstmState state{fused, constant(Tensor(Shape{batch, p.hidden}))};
  const Var observed = standardize_boxes(constant(last_box), scaling);
  std::vector<Var> probs;
  for (int j = 0; j < n; ++j) {
    const Var input = (coupled && j > 0)
                          ? standardize_boxes(slice_columns(predicted_boxes, 4 * (j - 1), 4), scaling)
                          : observed;
    state = lstm_cell(p.intention, input, state);
    probs.push_back(crossing_probability(linear(state.h, p.w_oi, p.b_oi)));
  }
  return concat_columns(probs);
}

}  // namespace ptinet
