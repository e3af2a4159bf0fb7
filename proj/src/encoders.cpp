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

#include "ptinet/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

constexpr std::array<const char*, kPathCount> kPathNames{"pv", "lcf_p", "lcf_b", "lcf_s", "gf_img",
                                                         "gf_o"};

void require_positive(int v, const char* what) {
  if (v <= 0) throw ConfigError(std::string("encoder: ") + what + " must be positive");
}

Var zeros(int rows, int cols) { return constant(Tensor(Shape{rows, cols})); }

LstmLayer add_lstm_layer(ParamStore& store, const std::string& prefix, int in, int hidden) {
  LstmLayer layer;
  layer.hidden = hidden;
  layer.w = store.add(prefix + ".w", Shape{in + hidden, 4 * hidden}, Init::fan_in(hidden));
  layer.b = store.add(prefix + ".b", Shape{4 * hidden}, Init::zero());
  return layer;
}

std::vector<LstmLayer> add_stack(ParamStore& store, const std::string& prefix, int in, int hidden,
                                 int layers) {
  std::vector<LstmLayer> out;
  for (int l = 0; l < layers; ++l) {
    out.push_back(add_lstm_layer(store, prefix + ".l" + std::to_string(l), l == 0 ? in : hidden,
                                 hidden));
  }
  return out;
}

ConvUnit add_conv(ParamStore& store, const std::string& prefix, int in, int out, int kernel,
                  int stride) {
  ConvUnit u;
  u.kernel = kernel;
  u.stride = stride;
  u.w = store.add(prefix + ".w", Shape{out, in, kernel, kernel}, Init::fan_in(in * kernel * kernel));
  u.b = store.add(prefix + ".b", Shape{out}, Init::zero());
  return u;
}

Var apply_conv(const ConvUnit& u, const Var& x) {
  const auto g = kernels::ConvGeometry::same(x.dim(1), x.dim(2), x.dim(3), u.w.dim(0), u.kernel,
                                             u.stride);
  return conv2d(x, u.w, u.b, g);
}

Var maybe_pool(const Var& x, int window) {
  if (x.dim(2) < window || x.dim(3) < window) return x;
  return max_pool2d(x, window);
}

Var residual_forward(const ResidualUnit& unit, const Var& x) {
  Var y = x;
  for (std::size_t i = 0; i < unit.convs.size(); ++i) {
    y = apply_conv(unit.convs[i], y);
    if (i + 1 < unit.convs.size()) y = relu(y);
  }
  const Var shortcut = unit.projection ? apply_conv(*unit.projection, x) : x;
  return relu(y + shortcut);
}

Var gaussian_head(const Var& h, const Var& w, const Var& b) { return linear(h, w, b); }

template <typename F>
Var with_path_name(Path p, F&& f) {
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(path_name(p)) + ": " + e.what());
  }
}

template <typename F>
LatentVars latent_with_path_name(Path p, F&& f) {
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(path_name(p)) + ": " + e.what());
  }
}

std::vector<Var> as_constants(const std::vector<Tensor>& ts) {
  std::vector<Var> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(constant(t));
  return out;
}

}  // namespace

const char* path_name(Path p) { return kPathNames[static_cast<int>(p)]; }

void EncoderConfig::validate() const {
  require_positive(latent_dim, "latent_dim");
  require_positive(lstm_hidden, "lstm_hidden");
  require_positive(lstm_layers, "lstm_layers");
  require_positive(mlp_width, "mlp_width");
  require_positive(convlstm_filters, "convlstm_filters");
  require_positive(convlstm_kernel, "convlstm_kernel");
  require_positive(convlstm_stride, "convlstm_stride");
  require_positive(convlstm_blocks, "convlstm_blocks");
  require_positive(pool_size, "pool_size");
  require_positive(flow_channels, "flow_channels");
  require_positive(flow_blocks, "flow_blocks");
  require_positive(resnet_width, "resnet_width");
  require_positive(gf_img_dim, "gf_img_dim");
  require_positive(gf_o_dim, "gf_o_dim");
  require_positive(image_dims.height, "image height");
  require_positive(image_dims.width, "image width");
  require_positive(inputs.pedestrian, "pedestrian attribute width");
  require_positive(inputs.behavior, "behavior attribute width");
  require_positive(inputs.scene, "scene attribute width");
  (void)conv_lstm_trace(*this);
}

FeatureLayout feature_layout(const EncoderConfig& c) {
  FeatureLayout layout;
  layout.width = {c.latent_dim, c.mlp_width, c.latent_dim, c.latent_dim, c.gf_img_dim, c.gf_o_dim};
  int at = 0;
  for (int i = 0; i < kPathCount; ++i) {
    layout.offset[i] = at;
    at += layout.width[i];
  }
  layout.total = at;
  return layout;
}

std::vector<ImageDims> conv_lstm_trace(const EncoderConfig& c) {
  std::vector<ImageDims> trace;
  int h = c.image_dims.height;
  int w = c.image_dims.width;
  for (int k = 0; k < c.convlstm_blocks; ++k) {
    h = kernels::same_output_extent(h, c.convlstm_stride) / c.pool_size;
    w = kernels::same_output_extent(w, c.convlstm_stride) / c.pool_size;
    if (h <= 0 || w <= 0) {
      throw ConfigError("ConvLSTM block " + std::to_string(k + 1) + " pools " +
                        std::to_string(c.image_dims.height) + "x" +
                        std::to_string(c.image_dims.width) + " frames to nothing");
    }
    trace.push_back({h, w});
  }
  return trace;
}

// ---- parameters --------------------------------------------------------------

LstmVaeParams add_lstm_vae(ParamStore& store, const std::string& prefix, int input_width,
                           int hidden, int layers, int latent) {
  LstmVaeParams p;
  p.input_width = input_width;
  p.latent = latent;
  p.layers = add_stack(store, prefix + ".enc", input_width, hidden, layers);
  p.w_mean = store.add(prefix + ".mean.w", Shape{hidden, latent}, Init::fan_in(hidden));
  p.b_mean = store.add(prefix + ".mean.b", Shape{latent}, Init::zero());
  p.w_log_var = store.add(prefix + ".log_var.w", Shape{hidden, latent}, Init::fan_in(hidden));
  p.b_log_var = store.add(prefix + ".log_var.b", Shape{latent}, Init::zero());
  return p;
}

LstmVaeDecoderParams add_lstm_vae_decoder(ParamStore& store, const std::string& prefix,
                                          int latent, int hidden, int layers, int output_width) {
  LstmVaeDecoderParams p;
  p.latent = latent;
  p.output_width = output_width;
  p.layers = add_stack(store, prefix + ".dec", latent, hidden, layers);
  p.w_mean = store.add(prefix + ".rec_mean.w", Shape{hidden, output_width}, Init::fan_in(hidden));
  p.b_mean = store.add(prefix + ".rec_mean.b", Shape{output_width}, Init::zero());
  p.w_log_var =
      store.add(prefix + ".rec_log_var.w", Shape{hidden, output_width}, Init::fan_in(hidden));
  p.b_log_var = store.add(prefix + ".rec_log_var.b", Shape{output_width}, Init::zero());
  return p;
}

MlpParams add_mlp(ParamStore& store, const std::string& prefix, int input_width, int hidden,
                  int output_width, Activation activation) {
  MlpParams p;
  p.activation = activation;
  p.w1 = store.add(prefix + ".fc1.w", Shape{input_width, hidden}, Init::fan_in(input_width));
  p.b1 = store.add(prefix + ".fc1.b", Shape{hidden}, Init::zero());
  p.w2 = store.add(prefix + ".fc2.w", Shape{hidden, output_width}, Init::fan_in(hidden));
  p.b2 = store.add(prefix + ".fc2.b", Shape{output_width}, Init::zero());
  return p;
}

ConvLstmParams add_conv_lstm(ParamStore& store, const std::string& prefix,
                             const EncoderConfig& c) {
  ConvLstmParams p;
  const int f = c.convlstm_filters;
  const int k = c.convlstm_kernel;
  int channels = 3;
  for (int i = 0; i < c.convlstm_blocks; ++i) {
    const std::string name = prefix + ".block" + std::to_string(i);
    ConvLstmBlock block;
    block.filters = f;
    block.w_x = store.add(name + ".wx", Shape{4 * f, channels, k, k}, Init::fan_in(channels * k * k));
    block.b = store.add(name + ".b", Shape{4 * f}, Init::zero());
    block.w_h = store.add(name + ".wh", Shape{4 * f, f, k, k}, Init::fan_in(f * k * k));
    p.blocks.push_back(block);
    channels = f;
  }
  const ImageDims last = conv_lstm_trace(c).back();
  const int flat = f * last.height * last.width;
  p.w_fc = store.add(prefix + ".fc.w", Shape{flat, c.gf_img_dim}, Init::fan_in(flat));
  p.b_fc = store.add(prefix + ".fc.b", Shape{c.gf_img_dim}, Init::zero());
  return p;
}

FlowParams add_flow_backbone(ParamStore& store, const std::string& prefix,
                             const EncoderConfig& c) {
  FlowParams p;
  p.kind = c.flow_backbone;
  int channels = 0;
  if (c.flow_backbone == FlowBackbone::kSmallCnn) {
    channels = c.flow_channels;
    p.stem = add_conv(store, prefix + ".stem", 2, channels, 3, 2);
    for (int i = 0; i < c.flow_blocks; ++i) {
      const std::string name = prefix + ".unit" + std::to_string(i);
      ResidualUnit u;
      u.convs.push_back(add_conv(store, name + ".conv0", channels, channels, 3, 1));
      u.convs.push_back(add_conv(store, name + ".conv1", channels, channels, 3, 1));
      p.units.push_back(std::move(u));
    }
    p.pool_after.push_back(std::min(1, c.flow_blocks - 1));
  } else {
    // Bottleneck stages of the 50-layer residual network.
    const int base = c.resnet_width;
    p.stem = add_conv(store, prefix + ".stem", 2, base, 7, 2);
    const std::array<int, 4> depth{3, 4, 6, 3};
    int in = base;
    for (int s = 0; s < 4; ++s) {
      const int mid = base << s;
      const int out = 4 * mid;
      for (int i = 0; i < depth[s]; ++i) {
        const std::string name = prefix + ".stage" + std::to_string(s) + ".unit" + std::to_string(i);
        const int stride = (i == 0 && s > 0) ? 2 : 1;
        ResidualUnit u;
        u.convs.push_back(add_conv(store, name + ".conv0", in, mid, 1, 1));
        u.convs.push_back(add_conv(store, name + ".conv1", mid, mid, 3, stride));
        u.convs.push_back(add_conv(store, name + ".conv2", mid, out, 1, 1));
        if (i == 0) u.projection = add_conv(store, name + ".proj", in, out, 1, stride);
        p.units.push_back(std::move(u));
        in = out;
      }
    }
    channels = in;
  }
  p.w_fc = store.add(prefix + ".fc.w", Shape{channels, c.gf_o_dim}, Init::fan_in(channels));
  p.b_fc = store.add(prefix + ".fc.b", Shape{c.gf_o_dim}, Init::zero());
  return p;
}

EncoderParams add_encoder(ParamStore& store, const EncoderConfig& c) {
  c.validate();
  EncoderParams p;
  const int d = c.latent_dim;
  const int hid = c.lstm_hidden;
  const int layers = c.lstm_layers;
  p.pv = add_lstm_vae(store, "pv", 8, hid, layers, d);
  p.pedestrian = add_mlp(store, "lcf_p", c.inputs.pedestrian, c.mlp_width, c.mlp_width,
                         c.mlp_activation);
  p.behavior = add_lstm_vae(store, "lcf_b", c.inputs.behavior, hid, layers, d);
  p.scene = add_lstm_vae(store, "lcf_s", c.inputs.scene, hid, layers, d);
  if (c.reconstruction) {
    p.pv_rec = add_lstm_vae_decoder(store, "pv", d, hid, layers, 8);
    p.behavior_rec = add_lstm_vae_decoder(store, "lcf_b", d, hid, layers, c.inputs.behavior);
    p.scene_rec = add_lstm_vae_decoder(store, "lcf_s", d, hid, layers, c.inputs.scene);
  }
  p.images = add_conv_lstm(store, "gf_img", c);
  p.flow = add_flow_backbone(store, "gf_o", c);
  return p;
}

// ---- forward -----------------------------------------------------------------

LstmState lstm_cell(const LstmLayer& layer, const Var& x, const LstmState& state) {
  const int h = layer.hidden;
  if (x.dim(1) + h != layer.w.dim(0)) {
    throw ShapeError("lstm_cell: input width " + std::to_string(x.dim(1)) + " but weights expect " +
                     std::to_string(layer.w.dim(0) - h));
  }
  const Var gates = linear(concat_columns({x, state.h}), layer.w, layer.b);
  const Var i = sigmoid(slice_columns(gates, 0, h));
  const Var f = sigmoid(slice_columns(gates, h, h));
  const Var g = tanh(slice_columns(gates, 2 * h, h));
  const Var o = sigmoid(slice_columns(gates, 3 * h, h));
  const Var c = f * state.c + i * g;
  return {o * tanh(c), c};
}

Var reparameterize(const Var& mean, const Var& log_var, const Tensor& noise) {
  require_same_shape(mean.value(), log_var.value(), "reparameterize");
  require_same_shape(mean.value(), noise, "reparameterize noise");
  return mean + exp(scale(log_var, 0.5)) * constant(noise);
}

namespace {

Var run_stack(const std::vector<LstmLayer>& layers, const std::vector<Var>& steps) {
  const int batch = steps.front().dim(0);
  std::vector<LstmState> state;
  for (const auto& l : layers) state.push_back({zeros(batch, l.hidden), zeros(batch, l.hidden)});
  for (const auto& step : steps) {
    Var x = step;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      state[l] = lstm_cell(layers[l], x, state[l]);
      x = state[l].h;
    }
  }
  return state.back().h;
}

}  // namespace

LatentVars lstm_vae_encode(const LstmVaeParams& p, const std::vector<Var>& steps, Mode mode,
                           const Tensor& noise) {
  if (steps.empty()) throw ShapeError("lstm_vae_encode: empty sequence");
  for (const auto& s : steps) {
    if (s.value().rank() != 2 || s.dim(1) != p.input_width || s.dim(0) != steps.front().dim(0)) {
      throw ShapeError("lstm_vae_encode: step " + shape_string(s.shape()) + ", expected [B," +
                       std::to_string(p.input_width) + "]");
    }
  }
  const Var top = run_stack(p.layers, steps);
  LatentVars out;
  out.mean = gaussian_head(top, p.w_mean, p.b_mean);
  out.log_var = gaussian_head(top, p.w_log_var, p.b_log_var);
  out.z = mode == Mode::kTrain ? reparameterize(out.mean, out.log_var, noise) : out.mean;
  return out;
}

std::vector<LatentVars> lstm_vae_reconstruct(const LstmVaeDecoderParams& p, const Var& z,
                                             int steps) {
  if (z.value().rank() != 2 || z.dim(1) != p.latent) {
    throw ShapeError("lstm_vae_reconstruct: z " + shape_string(z.shape()) + ", expected [B," +
                     std::to_string(p.latent) + "]");
  }
  if (steps < 1) throw ShapeError("lstm_vae_reconstruct: steps must be positive");
  const int batch = z.dim(0);
  std::vector<LstmState> state;
  for (const auto& l : p.layers) state.push_back({zeros(batch, l.hidden), zeros(batch, l.hidden)});
  std::vector<LatentVars> out;
  for (int t = 0; t < steps; ++t) {
    Var x = z;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      state[l] = lstm_cell(p.layers[l], x, state[l]);
      x = state[l].h;
    }
    LatentVars g;
    g.mean = gaussian_head(x, p.w_mean, p.b_mean);
    g.log_var = gaussian_head(x, p.w_log_var, p.b_log_var);
    g.z = g.mean;
    out.push_back(std::move(g));
  }
  return out;
}

Var mlp_encode(const MlpParams& p, const Var& x) {
  if (x.value().rank() != 2 || x.dim(1) != p.w1.dim(0)) {
    throw ShapeError("mlp_encode: input " + shape_string(x.shape()) + ", expected [B," +
                     std::to_string(p.w1.dim(0)) + "]");
  }
  Var h = linear(x, p.w1, p.b1);
  if (p.activation == Activation::kRelu) h = relu(h);
  return linear(h, p.w2, p.b2);
}

Var conv_lstm_forward(const ConvLstmParams& p, const std::vector<Var>& frames,
                      const EncoderConfig& c) {
  if (frames.empty()) throw ShapeError("conv_lstm_forward: no frames");
  const int batch = frames.front().dim(0);
  for (const auto& f : frames) {
    if (f.value().rank() != 4 || f.dim(0) != batch || f.dim(1) != 3 ||
        f.dim(2) != c.image_dims.height || f.dim(3) != c.image_dims.width) {
      throw ShapeError("conv_lstm_forward: frame " + shape_string(f.shape()) + ", expected [" +
                       std::to_string(batch) + ",3," + std::to_string(c.image_dims.height) + "," +
                       std::to_string(c.image_dims.width) + "]");
    }
  }
  struct BlockState {
    Var h, c;  // [B, F*Ho*Wo]
    kernels::ConvGeometry gx, gh;
  };
  std::vector<BlockState> state(p.blocks.size());
  int channels = 3;
  int height = c.image_dims.height;
  int width = c.image_dims.width;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const int f = p.blocks[k].filters;
    state[k].gx = kernels::ConvGeometry::same(channels, height, width, 4 * f, c.convlstm_kernel,
                                              c.convlstm_stride);
    state[k].gh = kernels::ConvGeometry::same(f, state[k].gx.out_height, state[k].gx.out_width,
                                              4 * f, c.convlstm_kernel, 1);
    height = state[k].gx.out_height / c.pool_size;
    width = state[k].gx.out_width / c.pool_size;
    channels = f;
  }

  Var out;
  for (const auto& frame : frames) {
    Var x = frame;
    for (std::size_t k = 0; k < p.blocks.size(); ++k) {
      const ConvLstmBlock& block = p.blocks[k];
      BlockState& s = state[k];
      const int f = block.filters;
      const int ho = s.gx.out_height;
      const int wo = s.gx.out_width;
      const int plane = f * ho * wo;
      Var gates = conv2d(x, block.w_x, block.b, s.gx);
      if (s.h.defined()) gates = gates + conv2d(reshape(s.h, Shape{batch, f, ho, wo}), block.w_h, Var(), s.gh);
      gates = reshape(gates, Shape{batch, 4 * plane});
      const Var i = sigmoid(slice_columns(gates, 0, plane));
      const Var fg = sigmoid(slice_columns(gates, plane, plane));
      const Var g = tanh(slice_columns(gates, 2 * plane, plane));
      const Var o = sigmoid(slice_columns(gates, 3 * plane, plane));
      s.c = s.c.defined() ? fg * s.c + i * g : i * g;
      s.h = o * tanh(s.c);
      x = max_pool2d(reshape(s.h, Shape{batch, f, ho, wo}), c.pool_size);
    }
    out = x;
  }
  const Var flat = reshape(out, Shape{batch, static_cast<int>(out.value().size()) / batch});
  if (flat.dim(1) != p.w_fc.dim(0)) {
    throw ShapeError("conv_lstm_forward: flattened width " + std::to_string(flat.dim(1)) +
                     " does not match FC input " + std::to_string(p.w_fc.dim(0)));
  }
  return linear(flat, p.w_fc, p.b_fc);
}

Var flow_backbone_forward(const FlowParams& p, const Var& flows, int frames_per_sample) {
  if (flows.value().rank() != 4 || flows.dim(1) != 2) {
    throw ShapeError("flow_backbone_forward: flows " + shape_string(flows.shape()) +
                     ", expected [B*T,2,H,W]");
  }
  if (frames_per_sample < 1 || flows.dim(0) % frames_per_sample != 0) {
    throw ShapeError("flow_backbone_forward: " + std::to_string(flows.dim(0)) +
                     " flow frames are not a multiple of " + std::to_string(frames_per_sample));
  }
  Var x = relu(apply_conv(p.stem, flows));
  x = maybe_pool(x, 2);
  for (std::size_t i = 0; i < p.units.size(); ++i) {
    x = residual_forward(p.units[i], x);
    if (std::find(p.pool_after.begin(), p.pool_after.end(), static_cast<int>(i)) !=
        p.pool_after.end()) {
      x = maybe_pool(x, 2);
    }
  }
  const Var per_frame = linear(global_avg_pool(x), p.w_fc, p.b_fc);
  return group_mean_rows(per_frame, frames_per_sample);
}

EncoderNoise zero_noise(int batch, int latent) {
  const Tensor z(Shape{batch, latent});
  return {z, z, z};
}

Encoded encode_batch(const EncoderParams& p, const EncoderConfig& c, const EncoderInput& in,
                     Mode mode, const EncoderNoise& noise) {
  const int batch = in.batch;
  if (batch < 1) throw ShapeError("encode_batch: empty batch");
  Encoded out;
  out.layout = feature_layout(c);
  std::vector<Var> parts;

  {
    std::vector<Var> steps = as_constants(in.pv);
    LatentVars lat = latent_with_path_name(Path::kPv, [&] { return lstm_vae_encode(p.pv, steps, mode, noise.pv); });
    lat.block = "pv";
    parts.push_back(lat.z);
    out.latents.push_back(lat);
    out.sequences.push_back(std::move(steps));
  }
  parts.push_back(with_path_name(Path::kLcfP, [&] { return mlp_encode(p.pedestrian, constant(in.pedestrian)); }));
  {
    std::vector<Var> steps = as_constants(in.behavior);
    LatentVars lat = latent_with_path_name(Path::kLcfB, [&] {
      return lstm_vae_encode(p.behavior, steps, mode, noise.behavior);
    });
    lat.block = "lcf_b";
    parts.push_back(lat.z);
    out.latents.push_back(lat);
    out.sequences.push_back(std::move(steps));
  }
  if (c.use_scene_attrs && !in.scene.empty()) {
    std::vector<Var> steps = as_constants(in.scene);
    LatentVars lat = latent_with_path_name(Path::kLcfS, [&] {
      return lstm_vae_encode(p.scene, steps, mode, noise.scene);
    });
    lat.block = "lcf_s";
    lat.mask = constant(in.scene_mask);
    parts.push_back(mul_column(lat.z, lat.mask));
    out.latents.push_back(lat);
    out.sequences.push_back(std::move(steps));
  } else {
    parts.push_back(zeros(batch, c.latent_dim));
  }
  if (c.use_images) {
    if (in.images.empty()) throw ShapeError("gf_img: path enabled but the batch carries no frames");
    parts.push_back(with_path_name(Path::kGfImg, [&] {
      return conv_lstm_forward(p.images, as_constants(in.images), c);
    }));
  } else {
    parts.push_back(zeros(batch, c.gf_img_dim));
  }
  if (c.use_flow) {
    if (in.flows.empty()) throw ShapeError("gf_o: path enabled but the batch carries no flow");
    parts.push_back(with_path_name(Path::kGfO, [&] {
      return flow_backbone_forward(p.flow, constant(in.flows), in.flows.dim(0) / batch);
    }));
  } else {
    parts.push_back(zeros(batch, c.gf_o_dim));
  }
  for (int i = 0; i < kPathCount; ++i) {
    if (parts[i].dim(0) != batch || parts[i].dim(1) != out.layout.width[i]) {
      throw ShapeError(std::string(path_name(static_cast<Path>(i))) + ": feature " +
                       shape_string(parts[i].shape()) + ", expected width " +
                       std::to_string(out.layout.width[i]));
    }
  }
  out.fused = concat_columns(parts);
  return out;
}

}  // namespace ptinet
