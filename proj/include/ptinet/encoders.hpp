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

// The four encoding paths and their fusion into one feature vector F:
// position-velocity LSTM-VAE, local context (attribute MLP, behavior and
// scene LSTM-VAEs), and global context (ConvLSTM over frames, residual CNN
// over optical flow). Everything is batched: row b of every input belongs to
// sample b.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ptinet/autograd.hpp"
#include "ptinet/domain.hpp"
#include "ptinet/params.hpp"

namespace ptinet {

enum class Mode { kTrain, kEval };
enum class FlowBackbone { kSmallCnn, kResidual50 };
enum class Activation { kRelu, kIdentity };

// Per-step input widths fixed by the attribute vocabulary.
struct InputWidths {
  int pedestrian = 8;
  int behavior = 8;
  int scene = 16;

  bool operator==(const InputWidths&) const = default;
};

struct EncoderConfig {
  int latent_dim = 64;
  int lstm_hidden = 512;
  int lstm_layers = 2;
  int mlp_width = 64;
  Activation mlp_activation = Activation::kRelu;
  int convlstm_filters = 32;
  int convlstm_kernel = 5;
  int convlstm_stride = 2;
  int convlstm_blocks = 3;
  int pool_size = 2;
  FlowBackbone flow_backbone = FlowBackbone::kSmallCnn;
  int flow_channels = 16;       // small CNN width
  int flow_blocks = 4;          // small CNN residual blocks
  int resnet_width = 64;        // bottleneck base width of the 50-layer variant
  int gf_img_dim = 256;
  int gf_o_dim = 128;
  ImageDims image_dims{240, 420};  // frame size the global paths consume
  InputWidths inputs;
  bool use_images = true;
  bool use_flow = true;
  bool use_scene_attrs = true;
  // Builds the per-block sequence decoders used by the reconstruction
  // regularizer.
  bool reconstruction = false;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

enum class Path { kPv = 0, kLcfP, kLcfB, kLcfS, kGfImg, kGfO };
inline constexpr int kPathCount = 6;
const char* path_name(Path p);

struct FeatureLayout {
  std::array<int, kPathCount> offset{};
  std::array<int, kPathCount> width{};
  int total = 0;

  int begin(Path p) const { return offset[static_cast<int>(p)]; }
  int size(Path p) const { return width[static_cast<int>(p)]; }
};

FeatureLayout feature_layout(const EncoderConfig& config);

// Spatial sizes after each ConvLSTM block (after pooling), in order.
std::vector<ImageDims> conv_lstm_trace(const EncoderConfig& config);

// ---- parameters --------------------------------------------------------------

struct LstmLayer {
  Var w;  // [in + hidden, 4*hidden], gate order i, f, g, o
  Var b;  // [4*hidden]
  int hidden = 0;
};

struct LstmVaeParams {
  std::vector<LstmLayer> layers;
  Var w_mean, b_mean, w_log_var, b_log_var;  // [hidden, latent]
  int input_width = 0;
  int latent = 0;
};

// Sequence decoder of an LSTM-VAE: the latent seeds the first layer's input
// at every step; a Gaussian head emits a mean and log-variance per step.
struct LstmVaeDecoderParams {
  std::vector<LstmLayer> layers;
  Var w_mean, b_mean, w_log_var, b_log_var;  // [hidden, output]
  int latent = 0;
  int output_width = 0;
};

struct MlpParams {
  Var w1, b1, w2, b2;
  Activation activation = Activation::kRelu;
};

struct ConvLstmBlock {
  Var w_x;  // [4F, C, k, k], strided
  Var b;    // [4F]
  Var w_h;  // [4F, F, k, k], stride 1
  int filters = 0;
};

struct ConvLstmParams {
  std::vector<ConvLstmBlock> blocks;
  Var w_fc, b_fc;
};

struct ConvUnit {
  Var w, b;
  int kernel = 3;
  int stride = 1;
};

struct ResidualUnit {
  std::vector<ConvUnit> convs;          // 2 (basic) or 3 (bottleneck)
  std::optional<ConvUnit> projection;   // 1x1 shortcut when shape changes
};

struct FlowParams {
  FlowBackbone kind = FlowBackbone::kSmallCnn;
  ConvUnit stem;
  std::vector<ResidualUnit> units;
  std::vector<int> pool_after;  // unit indices followed by a 2x2 max-pool
  Var w_fc, b_fc;
};

struct EncoderParams {
  LstmVaeParams pv, behavior, scene;
  std::optional<LstmVaeDecoderParams> pv_rec, behavior_rec, scene_rec;
  MlpParams pedestrian;
  ConvLstmParams images;
  FlowParams flow;
};

LstmVaeParams add_lstm_vae(ParamStore& store, const std::string& prefix, int input_width,
                           int hidden, int layers, int latent);
LstmVaeDecoderParams add_lstm_vae_decoder(ParamStore& store, const std::string& prefix,
                                          int latent, int hidden, int layers, int output_width);
MlpParams add_mlp(ParamStore& store, const std::string& prefix, int input_width, int hidden,
                  int output_width, Activation activation);
ConvLstmParams add_conv_lstm(ParamStore& store, const std::string& prefix,
                             const EncoderConfig& config);
FlowParams add_flow_backbone(ParamStore& store, const std::string& prefix,
                             const EncoderConfig& config);
EncoderParams add_encoder(ParamStore& store, const EncoderConfig& config);

// ---- forward paths -----------------------------------------------------------

struct LatentVars {
  Var mean;     // [B, d]
  Var log_var;  // [B, d]
  Var z;        // feature handed to fusion
  Var mask;     // [B, 1]; undefined means every row counts
  std::string block;
};

struct LstmState {
  Var h, c;
};

// One LSTM step over a batch.
LstmState lstm_cell(const LstmLayer& layer, const Var& x, const LstmState& state);

// z = mean + exp(log_var / 2) * noise.
Var reparameterize(const Var& mean, const Var& log_var, const Tensor& noise);

// steps: m inputs [B, input_width]. In eval mode the feature is the mean and
// noise is ignored; in train mode noise [B, latent] is required.
LatentVars lstm_vae_encode(const LstmVaeParams& params, const std::vector<Var>& steps, Mode mode,
                           const Tensor& noise);

// Per-step Gaussian over the reconstructed sequence.
std::vector<LatentVars> lstm_vae_reconstruct(const LstmVaeDecoderParams& params, const Var& z,
                                             int steps);

Var mlp_encode(const MlpParams& params, const Var& x);

// frames: m inputs [B, 3, H, W] in temporal order.
Var conv_lstm_forward(const ConvLstmParams& params, const std::vector<Var>& frames,
                      const EncoderConfig& config);

// flows: [B * T, 2, H, W] with the T frames of sample b in rows b*T .. b*T+T-1.
Var flow_backbone_forward(const FlowParams& params, const Var& flows, int frames_per_sample);

// Model-ready batch. Sequences are indexed by time.
struct EncoderInput {
  int batch = 0;
  std::vector<Tensor> pv;        // m x [B, 8]
  Tensor pedestrian;             // [B, wp]
  std::vector<Tensor> behavior;  // m x [B, wb]
  std::vector<Tensor> scene;     // m x [B, ws]; empty when no sample has scene attrs
  Tensor scene_mask;             // [B, 1]
  std::vector<Tensor> images;    // m x [B, 3, H, W]; empty when not loaded
  Tensor flows;                  // [B*(m-1), 2, H, W]; empty when not loaded
};

struct EncoderNoise {
  Tensor pv, behavior, scene;  // [B, latent] each
};

EncoderNoise zero_noise(int batch, int latent);

struct Encoded {
  Var fused;  // [B, |F|]
  FeatureLayout layout;
  std::vector<LatentVars> latents;
  // Inputs of each VAE block in `latents`, for the reconstruction term.
  std::vector<std::vector<Var>> sequences;
};

Encoded encode_batch(const EncoderParams& params, const EncoderConfig& config,
                     const EncoderInput& input, Mode mode, const EncoderNoise& noise);

}  // namespace ptinet
