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

// The assembled network: encoders, fusion and both decoders over one
// parameter store, plus the batch assembly that turns samples into model
// inputs.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ptinet/decoders.hpp"
#include "ptinet/encoders.hpp"
#include "ptinet/objectives.hpp"

namespace ptinet {

struct ModelConfig {
  int m = 16;
  int n = 15;
  EncoderConfig encoder;
  DecoderConfig decoder;

  bool operator==(const ModelConfig&) const = default;
};

// Position and velocity statistics over the observed windows of a training
// set. Zero or tiny spreads fall back to 1.
BoxScaling fit_box_scaling(std::span<const PedestrianSample> samples);

struct Batch {
  EncoderInput input;
  Tensor last_box;       // [B, 4] pixels
  Tensor future_boxes;   // [B, 4n] pixels; empty without targets
  Tensor future_labels;  // [B, n]; empty without targets
  int n = 0;
};

// Samples must be in pixels (Normalization::kNone); normalized samples are
// converted back first.
Batch make_batch(std::span<const PedestrianSample* const> samples, const ModelConfig& config,
                 const BoxScaling& scaling, bool with_targets);

struct ForwardResult {
  Var boxes;  // [B, 4n]
  Var probs;  // [B, n]
  Encoded encoded;
  Var reconstruction_nll;  // undefined unless the encoder builds reconstruction decoders
};

struct LossTerms {
  Var total, trajectory, intention;
};

class PTINet {
 public:
  PTINet(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const EncoderParams& encoder() const { return encoder_; }
  const DecoderParams& decoders() const { return decoders_; }
  const BoxScaling& scaling() const { return scaling_; }
  void set_scaling(const BoxScaling& s) { scaling_ = s; }
  // Toggles may change after construction; widths may not.
  void set_toggles(bool use_images, bool use_flow, bool use_scene_attrs);

  ForwardResult forward(const Batch& batch, Mode mode, const EncoderNoise& noise) const;
  LossTerms loss(const ForwardResult& out, const Batch& batch, const LossConfig& cfg) const;

  // Eval-mode predictions without recording a graph.
  std::vector<PredictionOutput> predict(std::span<const PedestrianSample* const> samples) const;

  EncoderNoise draw_noise(int batch, std::mt19937_64& rng) const;

 private:
  ModelConfig config_;
  ParamStore store_;
  EncoderParams encoder_;
  DecoderParams decoders_;
  BoxScaling scaling_;
};

// Single-sample encoding through the model's standardization.
Encoded encode_sample(const PTINet& model, const PedestrianSample& sample, Mode mode,
                      const EncoderNoise& noise);

// Plain latents (rows of the batch) for the reference loss functions.
std::vector<LatentGaussian> latent_rows(const LatentVars& g);

}  // namespace ptinet
