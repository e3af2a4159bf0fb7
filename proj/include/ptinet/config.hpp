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

// Training configuration and its flat key=value text form. Keys are the
// field names, with nested structs under dotted prefixes (loss.beta,
// encoder.latent_dim, decoder.absolute_position).

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptinet/model.hpp"

namespace ptinet {

struct TrainConfig {
  int m = 16;
  double horizon_seconds = 0.5;
  double lr_init = 1e-4;
  double lr_power = 0.9;
  int max_epoch = 200;
  int batch_size = 4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  // Parameters are kept representable in float32 after every update so a
  // float32 checkpoint reloads the exact model.
  bool float32_params = true;
  LossConfig loss;
  EncoderConfig encoder;
  DecoderConfig decoder;

  std::string data_dir;
  std::string val_dir;       // empty: hold out the last videos of data_dir
  double val_fraction = 0.2;
  int window_stride = 1;
  int max_train_samples = 0;  // 0: no cap
  int max_val_samples = 0;
  bool eval_prefix = false;   // allow evaluating shorter horizons as a rollout prefix

  // Future steps at 30 frames per second.
  int horizon_steps() const;
  ModelConfig model_config() const;
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Small widths and 48x84 frames; trains in minutes on one CPU core.
TrainConfig desk_preset();

const std::vector<std::string>& config_keys();
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

// '#' starts a comment; blank lines are ignored. Unknown keys and malformed
// values throw ConfigError naming the line.
void apply_config_text(TrainConfig& cfg, std::string_view text);
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base = {});
std::string format_config(const TrainConfig& cfg);

}  // namespace ptinet
