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

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ptinet/autograd.hpp"
#include "ptinet/encoders.hpp"
#include "ptinet/params.hpp"

namespace ptinet::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Largest relative error between the analytic directional derivative of f
// along random directions over `leaves` and its central difference.
inline double directional_grad_error(const std::vector<Var>& leaves, const std::function<Var()>& f,
                                     std::uint64_t seed, int directions = 3, double step = 1e-5) {
  for (Var v : leaves) v.zero_grad();
  backward(f());
  std::vector<Tensor> grads;
  for (const Var& v : leaves) grads.push_back(v.grad().empty() ? Tensor(v.shape()) : v.grad());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int d = 0; d < directions; ++d) {
    std::vector<Tensor> dir;
    double analytic = 0.0;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      Tensor t(leaves[k].shape());
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = normal(rng);
        analytic += t[i] * grads[k][i];
      }
      dir.push_back(std::move(t));
    }
    auto shift = [&](double s) {
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        Var v = leaves[k];
        Tensor& x = v.mutable_value();
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * dir[k][i];
      }
    };
    double plus = 0.0, minus = 0.0;
    {
      NoGradGuard guard;
      shift(step);
      plus = f().item();
      shift(-2.0 * step);
      minus = f().item();
      shift(step);
    }
    const double numeric = (plus - minus) / (2.0 * step);
    // A readout that ignores the leaves would pass vacuously.
    if (std::abs(analytic) < 1e-9) return 1.0;
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-10});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

inline std::vector<Var> all_params(const ParamStore& store) {
  std::vector<Var> out;
  for (const auto& e : store.entries()) out.push_back(e.var);
  return out;
}

// Miniature widths for gradient checks: latent 4, hidden 8, 16x28 frames.
inline EncoderConfig mini_encoder_config() {
  EncoderConfig c;
  c.latent_dim = 4;
  c.lstm_hidden = 8;
  c.lstm_layers = 2;
  c.mlp_width = 5;
  c.convlstm_filters = 2;
  c.convlstm_kernel = 3;
  c.convlstm_blocks = 2;
  c.flow_channels = 3;
  c.flow_blocks = 2;
  c.gf_img_dim = 3;
  c.gf_o_dim = 3;
  c.image_dims = {16, 28};
  c.inputs = {5, 4, 6};
  return c;
}

inline EncoderInput random_encoder_input(const EncoderConfig& c, int batch, int m, std::mt19937_64& rng,
                                         bool with_scene = true) {
  EncoderInput in;
  in.batch = batch;
  std::bernoulli_distribution coin(0.5);
  auto binary = [&](Shape s) {
    Tensor t(std::move(s));
    for (double& v : t.values()) v = coin(rng) ? 1.0 : 0.0;
    return t;
  };
  for (int k = 0; k < m; ++k) {
    in.pv.push_back(random_tensor({batch, 8}, rng));
    in.behavior.push_back(binary({batch, c.inputs.behavior}));
    if (with_scene) in.scene.push_back(binary({batch, c.inputs.scene}));
    in.images.push_back(random_tensor({batch, 3, c.image_dims.height, c.image_dims.width}, rng, 0.0, 1.0));
  }
  in.pedestrian = binary({batch, c.inputs.pedestrian});
  in.scene_mask = Tensor(Shape{batch, 1}, with_scene ? 1.0 : 0.0);
  in.flows = random_tensor({batch * (m - 1), 2, c.image_dims.height, c.image_dims.width}, rng, -2.0, 2.0);
  return in;
}

inline EncoderNoise random_noise(int batch, int latent, std::mt19937_64& rng) {
  EncoderNoise e;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Tensor* t : {&e.pv, &e.behavior, &e.scene}) {
    *t = Tensor(Shape{batch, latent});
    for (double& v : t->values()) v = normal(rng);
  }
  return e;
}

}  // namespace ptinet::testing
