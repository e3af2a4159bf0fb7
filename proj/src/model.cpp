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

#include "ptinet/model.hpp"

#include <cmath>
#include <cstring>
#include <optional>

#include "ptinet/data.hpp"
#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

std::array<double, 4> as_array(const BoundingBox& b) { return {b.x, b.y, b.w, b.h}; }
std::array<double, 4> as_array(const BoxVelocity& v) { return {v.dx, v.dy, v.dw, v.dh}; }

void finish_stats(const std::array<double, 4>& s1, const std::array<double, 4>& s2, double count,
                  std::array<double, 4>& mean, std::array<double, 4>& stdev) {
  for (int c = 0; c < 4; ++c) {
    if (count <= 0) {
      mean[c] = 0.0;
      stdev[c] = 1.0;
      continue;
    }
    mean[c] = s1[c] / count;
    const double var = std::max(0.0, s2[c] / count - mean[c] * mean[c]);
    stdev[c] = std::sqrt(var) > 1e-6 ? std::sqrt(var) : 1.0;
  }
}

void copy_frame(const Tensor& frame, Tensor& dst, std::size_t row, const Shape& expected,
                const char* what) {
  if (frame.shape() != expected) {
    throw ShapeError(std::string(what) + " " + shape_string(frame.shape()) + ", model expects " +
                     shape_string(expected));
  }
  std::memcpy(dst.data() + row * frame.size(), frame.data(), frame.size() * sizeof(double));
}

}  // namespace

BoxScaling fit_box_scaling(std::span<const PedestrianSample> samples) {
  std::array<double, 4> p1{}, p2{}, v1{}, v2{};
  double np = 0, nv = 0;
  for (const auto& raw : samples) {
    const PedestrianSample s = denormalize_sample(raw);
    for (const auto& b : s.past.positions) {
      const auto a = as_array(b);
      for (int c = 0; c < 4; ++c) {
        p1[c] += a[c];
        p2[c] += a[c] * a[c];
      }
      np += 1;
    }
    // The leading velocity is zero by construction and says nothing.
    for (std::size_t t = 1; t < s.past.velocities.size(); ++t) {
      const auto a = as_array(s.past.velocities[t]);
      for (int c = 0; c < 4; ++c) {
        v1[c] += a[c];
        v2[c] += a[c] * a[c];
      }
      nv += 1;
    }
  }
  BoxScaling out;
  finish_stats(p1, p2, np, out.pos_mean, out.pos_std);
  finish_stats(v1, v2, nv, out.vel_mean, out.vel_std);
  return out;
}

Batch make_batch(std::span<const PedestrianSample* const> samples, const ModelConfig& config,
                 const BoxScaling& scaling, bool with_targets) {
  const int batch = static_cast<int>(samples.size());
  if (batch == 0) throw ShapeError("make_batch: no samples");
  const int m = config.m;
  const int n = config.n;
  const EncoderConfig& ec = config.encoder;
  const InputWidths& widths = ec.inputs;

  Batch out;
  out.n = n;
  EncoderInput& in = out.input;
  in.batch = batch;
  in.pv.assign(m, Tensor(Shape{batch, 8}));
  in.behavior.assign(m, Tensor(Shape{batch, widths.behavior}));
  in.pedestrian = Tensor(Shape{batch, widths.pedestrian});
  in.scene_mask = Tensor(Shape{batch, 1});
  out.last_box = Tensor(Shape{batch, 4});
  if (with_targets) {
    out.future_boxes = Tensor(Shape{batch, 4 * n});
    out.future_labels = Tensor(Shape{batch, n});
  }

  bool any_scene = false;
  bool all_images = ec.use_images;
  bool all_flow = ec.use_flow;
  for (const auto* s : samples) {
    any_scene = any_scene || s->local.scene_attrs.has_value();
    all_images = all_images && !s->global_ctx.images.empty();
    all_flow = all_flow && !s->global_ctx.flows.empty();
  }
  if (any_scene) in.scene.assign(m, Tensor(Shape{batch, widths.scene}));
  const Shape image_shape{3, ec.image_dims.height, ec.image_dims.width};
  const Shape flow_shape{2, ec.image_dims.height, ec.image_dims.width};
  if (all_images) in.images.assign(m, Tensor(Shape{batch, 3, ec.image_dims.height, ec.image_dims.width}));
  if (all_flow) in.flows = Tensor(Shape{batch * (m - 1), 2, ec.image_dims.height, ec.image_dims.width});

  for (int b = 0; b < batch; ++b) {
    std::optional<PedestrianSample> converted;
    const PedestrianSample* s = samples[b];
    if (s->normalization != Normalization::kNone) {
      converted = denormalize_sample(*s);
      s = &*converted;
    }
    if (static_cast<int>(s->past.positions.size()) != m) {
      throw ShapeError("make_batch: sample " + s->pedestrian_id + " has " +
                       std::to_string(s->past.positions.size()) + " observed steps, model expects " +
                       std::to_string(m));
    }
    for (int t = 0; t < m; ++t) {
      const auto p = as_array(s->past.positions[t]);
      const auto v = as_array(s->past.velocities[t]);
      for (int c = 0; c < 4; ++c) {
        in.pv[t].at(b, c) = (p[c] - scaling.pos_mean[c]) / scaling.pos_std[c];
        in.pv[t].at(b, 4 + c) = (v[c] - scaling.vel_mean[c]) / scaling.vel_std[c];
      }
      const auto& beh = s->local.behavior_attrs.at(t);
      if (static_cast<int>(beh.size()) != widths.behavior) {
        throw ShapeError("make_batch: behavior width " + std::to_string(beh.size()) +
                         ", model expects " + std::to_string(widths.behavior));
      }
      std::copy(beh.begin(), beh.end(), in.behavior[t].data() + b * widths.behavior);
      if (any_scene && s->local.scene_attrs) {
        const auto& sc = s->local.scene_attrs->at(t);
        if (static_cast<int>(sc.size()) != widths.scene) {
          throw ShapeError("make_batch: scene width " + std::to_string(sc.size()) +
                           ", model expects " + std::to_string(widths.scene));
        }
        std::copy(sc.begin(), sc.end(), in.scene[t].data() + b * widths.scene);
      }
      if (all_images) copy_frame(*s->global_ctx.images.at(t), in.images[t], b, image_shape, "frame");
    }
    if (all_flow) {
      for (int t = 0; t + 1 < m; ++t) {
        copy_frame(*s->global_ctx.flows.at(t), in.flows, static_cast<std::size_t>(b) * (m - 1) + t,
                   flow_shape, "flow");
      }
    }
    in.scene_mask.at(b, 0) = s->local.scene_attrs ? 1.0 : 0.0;
    if (static_cast<int>(s->local.pedestrian_attrs.size()) != widths.pedestrian) {
      throw ShapeError("make_batch: pedestrian attribute width " +
                       std::to_string(s->local.pedestrian_attrs.size()) + ", model expects " +
                       std::to_string(widths.pedestrian));
    }
    std::copy(s->local.pedestrian_attrs.begin(), s->local.pedestrian_attrs.end(),
              in.pedestrian.data() + b * widths.pedestrian);
    const auto last = as_array(s->past.positions.back());
    for (int c = 0; c < 4; ++c) out.last_box.at(b, c) = last[c];
    if (with_targets) {
      if (static_cast<int>(s->future_boxes.size()) < n || static_cast<int>(s->future_intentions.size()) < n) {
        throw ShapeError("make_batch: sample " + s->pedestrian_id + " has fewer than " +
                         std::to_string(n) + " future steps");
      }
      for (int j = 0; j < n; ++j) {
        const auto f = as_array(s->future_boxes[j]);
        for (int c = 0; c < 4; ++c) out.future_boxes.at(b, 4 * j + c) = f[c];
        out.future_labels.at(b, j) = s->future_intentions[j];
      }
    }
  }
  return out;
}

PTINet::PTINet(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  if (config_.m < 2) throw ConfigError("m must be at least 2");
  if (config_.n < 1) throw ConfigError("n must be positive");
  encoder_ = add_encoder(store_, config_.encoder);
  decoders_ = add_decoders(store_, feature_layout(config_.encoder).total);
  store_.initialize(seed);
}

void PTINet::set_toggles(bool use_images, bool use_flow, bool use_scene_attrs) {
  config_.encoder.use_images = use_images;
  config_.encoder.use_flow = use_flow;
  config_.encoder.use_scene_attrs = use_scene_attrs;
}

EncoderNoise PTINet::draw_noise(int batch, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  EncoderNoise noise = zero_noise(batch, config_.encoder.latent_dim);
  for (Tensor* t : {&noise.pv, &noise.behavior, &noise.scene}) {
    for (double& v : t->values()) v = normal(rng);
  }
  return noise;
}

ForwardResult PTINet::forward(const Batch& batch, Mode mode, const EncoderNoise& noise) const {
  ForwardResult out;
  out.encoded = encode_batch(encoder_, config_.encoder, batch.input, mode, noise);
  out.boxes = decode_trajectory(decoders_, out.encoded.fused, batch.last_box, batch.n, scaling_,
                                config_.decoder);
  out.probs = decode_intention(decoders_, out.encoded.fused, batch.last_box, batch.n, scaling_,
                               config_.decoder, out.boxes);
  if (config_.encoder.reconstruction) {
    const LstmVaeDecoderParams* decs[] = {&*encoder_.pv_rec, &*encoder_.behavior_rec,
                                          &*encoder_.scene_rec};
    for (std::size_t i = 0; i < out.encoded.latents.size(); ++i) {
      const LatentVars& lat = out.encoded.latents[i];
      const auto& seq = out.encoded.sequences[i];
      const auto steps = lstm_vae_reconstruct(*decs[i], lat.z, static_cast<int>(seq.size()));
      const Var nll = graph::gaussian_nll(steps, seq, lat.mask);
      out.reconstruction_nll = out.reconstruction_nll.defined() ? out.reconstruction_nll + nll : nll;
    }
  }
  return out;
}

LossTerms PTINet::loss(const ForwardResult& out, const Batch& batch, const LossConfig& cfg) const {
  if (batch.future_boxes.empty()) throw ShapeError("loss: batch carries no targets");
  LossTerms t;
  t.trajectory = graph::rmse(out.boxes, batch.future_boxes);
  for (const auto& lat : out.encoded.latents) t.trajectory = t.trajectory + scale(graph::kl(lat), cfg.beta);
  if (cfg.reconstruction_reg && out.reconstruction_nll.defined()) {
    t.trajectory = t.trajectory + out.reconstruction_nll;
  }
  t.intention = graph::bce(out.probs, batch.future_labels, cfg.epsilon);
  t.total = scale(t.trajectory, cfg.lambda_traj) + scale(t.intention, cfg.lambda_int);
  return t;
}

std::vector<PredictionOutput> PTINet::predict(std::span<const PedestrianSample* const> samples) const {
  NoGradGuard guard;
  const Batch batch = make_batch(samples, config_, scaling_, false);
  const ForwardResult out = forward(batch, Mode::kEval, zero_noise(batch.input.batch, config_.encoder.latent_dim));
  std::vector<PredictionOutput> preds(samples.size());
  for (std::size_t b = 0; b < samples.size(); ++b) {
    for (int j = 0; j < config_.n; ++j) {
      const Tensor& v = out.boxes.value();
      const int r = static_cast<int>(b);
      preds[b].boxes.push_back({v.at(r, 4 * j), v.at(r, 4 * j + 1), v.at(r, 4 * j + 2), v.at(r, 4 * j + 3)});
      preds[b].intention_probs.push_back(out.probs.value().at(r, j));
    }
  }
  return preds;
}

Encoded encode_sample(const PTINet& model, const PedestrianSample& sample, Mode mode,
                      const EncoderNoise& noise) {
  const PedestrianSample* ptr = &sample;
  const Batch batch = make_batch(std::span(&ptr, 1), model.config(), model.scaling(), false);
  return encode_batch(model.encoder(), model.config().encoder, batch.input, mode, noise);
}

std::vector<LatentGaussian> latent_rows(const LatentVars& g) {
  std::vector<LatentGaussian> out;
  const int rows = g.mean.dim(0);
  const int d = g.mean.dim(1);
  for (int r = 0; r < rows; ++r) {
    if (g.mask.defined() && g.mask.value().at(r, 0) == 0.0) continue;
    LatentGaussian lg;
    for (int c = 0; c < d; ++c) {
      lg.mean.push_back(g.mean.value().at(r, c));
      lg.log_var.push_back(g.log_var.value().at(r, c));
    }
    out.push_back(std::move(lg));
  }
  return out;
}

}  // namespace ptinet
