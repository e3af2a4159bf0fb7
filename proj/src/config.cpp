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

#include "ptinet/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "' (expected true/false)");
}

template <typename T>
Field number(std::string key, T TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

template <typename S, typename T>
Field nested(std::string key, S TrainConfig::*outer, T S::*member) {
  return {key,
          [outer, member](const TrainConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*outer).*member ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return fmt((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          },
          [outer, member, key](TrainConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(key, v);
            else (c.*outer).*member = parse_number<T>(key, v);
          }};
}

Field flag(std::string key, bool TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_bool(key, v); }};
}

Field text(std::string key, std::string TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return c.*member; },
          [member](TrainConfig& c, const std::string& v) { c.*member = v; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number("m", &TrainConfig::m));
    f.push_back(number("horizon_seconds", &TrainConfig::horizon_seconds));
    f.push_back(number("lr_init", &TrainConfig::lr_init));
    f.push_back(number("lr_power", &TrainConfig::lr_power));
    f.push_back(number("max_epoch", &TrainConfig::max_epoch));
    f.push_back(number("batch_size", &TrainConfig::batch_size));
    f.push_back(number("adam_beta1", &TrainConfig::adam_beta1));
    f.push_back(number("adam_beta2", &TrainConfig::adam_beta2));
    f.push_back(number("adam_epsilon", &TrainConfig::adam_epsilon));
    f.push_back(number("weight_decay", &TrainConfig::weight_decay));
    f.push_back(number("seed", &TrainConfig::seed));
    f.push_back(flag("float32_params", &TrainConfig::float32_params));
    f.push_back(text("data_dir", &TrainConfig::data_dir));
    f.push_back(text("val_dir", &TrainConfig::val_dir));
    f.push_back(number("val_fraction", &TrainConfig::val_fraction));
    f.push_back(number("window_stride", &TrainConfig::window_stride));
    f.push_back(number("max_train_samples", &TrainConfig::max_train_samples));
    f.push_back(number("max_val_samples", &TrainConfig::max_val_samples));
    f.push_back(flag("eval_prefix", &TrainConfig::eval_prefix));

    f.push_back(nested("loss.beta", &TrainConfig::loss, &LossConfig::beta));
    f.push_back(nested("loss.lambda_traj", &TrainConfig::loss, &LossConfig::lambda_traj));
    f.push_back(nested("loss.lambda_int", &TrainConfig::loss, &LossConfig::lambda_int));
    f.push_back(nested("loss.epsilon", &TrainConfig::loss, &LossConfig::epsilon));
    f.push_back(nested("loss.reconstruction_reg", &TrainConfig::loss, &LossConfig::reconstruction_reg));

    using E = EncoderConfig;
    auto enc = [&](const char* k, auto member) { f.push_back(nested(std::string("encoder.") + k, &TrainConfig::encoder, member)); };
    enc("latent_dim", &E::latent_dim);
    enc("lstm_hidden", &E::lstm_hidden);
    enc("lstm_layers", &E::lstm_layers);
    enc("mlp_width", &E::mlp_width);
    f.push_back({"encoder.mlp_activation",
                 [](const TrainConfig& c) {
                   return std::string(c.encoder.mlp_activation == Activation::kRelu ? "relu" : "identity");
                 },
                 [](TrainConfig& c, const std::string& v) {
                   if (v == "relu") c.encoder.mlp_activation = Activation::kRelu;
                   else if (v == "identity") c.encoder.mlp_activation = Activation::kIdentity;
                   else throw ConfigError("bad value for encoder.mlp_activation: '" + v + "'");
                 }});
    enc("convlstm_filters", &E::convlstm_filters);
    enc("convlstm_kernel", &E::convlstm_kernel);
    enc("convlstm_stride", &E::convlstm_stride);
    enc("convlstm_blocks", &E::convlstm_blocks);
    enc("pool_size", &E::pool_size);
    f.push_back({"encoder.flow_backbone",
                 [](const TrainConfig& c) {
                   return std::string(c.encoder.flow_backbone == FlowBackbone::kSmallCnn ? "small-cnn" : "residual-50");
                 },
                 [](TrainConfig& c, const std::string& v) {
                   if (v == "small-cnn") c.encoder.flow_backbone = FlowBackbone::kSmallCnn;
                   else if (v == "residual-50") c.encoder.flow_backbone = FlowBackbone::kResidual50;
                   else throw ConfigError("bad value for encoder.flow_backbone: '" + v + "'");
                 }});
    enc("flow_channels", &E::flow_channels);
    enc("flow_blocks", &E::flow_blocks);
    enc("resnet_width", &E::resnet_width);
    enc("gf_img_dim", &E::gf_img_dim);
    enc("gf_o_dim", &E::gf_o_dim);
    f.push_back({"encoder.image_height", [](const TrainConfig& c) { return std::to_string(c.encoder.image_dims.height); },
                 [](TrainConfig& c, const std::string& v) { c.encoder.image_dims.height = parse_number<int>("encoder.image_height", v); }});
    f.push_back({"encoder.image_width", [](const TrainConfig& c) { return std::to_string(c.encoder.image_dims.width); },
                 [](TrainConfig& c, const std::string& v) { c.encoder.image_dims.width = parse_number<int>("encoder.image_width", v); }});
    enc("use_images", &E::use_images);
    enc("use_flow", &E::use_flow);
    enc("use_scene_attrs", &E::use_scene_attrs);
    enc("reconstruction", &E::reconstruction);

    f.push_back(nested("decoder.absolute_position", &TrainConfig::decoder, &DecoderConfig::absolute_position));
    f.push_back(nested("decoder.couple_intention", &TrainConfig::decoder, &DecoderConfig::couple_intention));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

int TrainConfig::horizon_steps() const { return static_cast<int>(std::lround(horizon_seconds * 30.0)); }

ModelConfig TrainConfig::model_config() const {
  ModelConfig mc;
  mc.m = m;
  mc.n = horizon_steps();
  mc.encoder = encoder;
  mc.encoder.reconstruction = encoder.reconstruction || loss.reconstruction_reg;
  mc.decoder = decoder;
  return mc;
}

void TrainConfig::validate() const {
  if (m < 2) throw ConfigError("m must be at least 2");
  if (!(horizon_seconds > 0.0) || horizon_steps() < 1) throw ConfigError("horizon_seconds must give at least one step");
  if (!(lr_init > 0.0)) throw ConfigError("lr_init must be positive");
  if (!(lr_power > 0.0)) throw ConfigError("lr_power must be positive");
  if (max_epoch < 1) throw ConfigError("max_epoch must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (window_stride < 1) throw ConfigError("window_stride must be positive");
  if (max_train_samples < 0 || max_val_samples < 0) throw ConfigError("sample caps must be non-negative");
  loss.validate();
  encoder.validate();
}

TrainConfig desk_preset() {
  TrainConfig c;
  c.lr_init = 2e-3;
  c.weight_decay = 1e-6;
  c.max_epoch = 15;
  c.batch_size = 4;
  // At beta 1 the KL term collapses the behavior latent and intention stays at chance.
  c.loss.beta = 0.01;
  EncoderConfig& e = c.encoder;
  e.latent_dim = 16;
  e.lstm_hidden = 64;
  e.mlp_width = 32;
  e.convlstm_filters = 6;
  e.convlstm_kernel = 3;
  e.convlstm_blocks = 2;
  e.gf_img_dim = 32;
  e.gf_o_dim = 32;
  e.flow_channels = 8;
  e.image_dims = {32, 56};
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, value);
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void apply_config_text(TrainConfig& cfg, std::string_view body) {
  std::istringstream in{std::string(body)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key=value");
    try {
      set_config_value(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    apply_config_text(base, ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return base;
}

std::string format_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(cfg) + "\n";
  return out;
}

}  // namespace ptinet
