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

// Learning-rate schedule, optimizer, dataset assembly, checkpoints and the
// training loop.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptinet/config.hpp"
#include "ptinet/data.hpp"
#include "ptinet/evaluation.hpp"

namespace ptinet {

// lr_init * (1 - epoch / max_epoch)^lr_power for epoch in [0, max_epoch].
double poly_lr(int epoch, const TrainConfig& cfg);

// Adam with L2 weight decay folded into the gradient.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-9;
    double weight_decay = 0.0;
    bool float32_params = false;
  };

  Adam(ParamStore& params, Options options);
  void step(double lr);
  long steps() const { return t_; }

 private:
  ParamStore& params_;
  Options options_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

void round_params_to_float(ParamStore& params);

// ---- data --------------------------------------------------------------------

struct LoadOptions {
  int m = 16;
  int n = 15;
  int stride = 1;
  ImageDims target{240, 420};
  GlobalToggles toggles;
};

// Windows every track of `tracks` (paths relative to base_dir) into samples
// in pixel units with their global context loaded.
std::vector<PedestrianSample> build_samples(const std::vector<PedestrianTrack>& tracks,
                                            const AttributeVocabulary& vocab,
                                            const LoadOptions& options, FrameCache& cache,
                                            const std::filesystem::path& base_dir);

struct DatasetSplit {
  AttributeVocabulary vocab;
  std::vector<PedestrianSample> train;
  std::vector<PedestrianSample> val;
};

// Reads data_dir (and val_dir when set) as written by the synth command:
// tracks.jsonl, vocab.json and the frame tree.
DatasetSplit load_dataset(const TrainConfig& cfg, FrameCache& cache);

LoadOptions load_options(const TrainConfig& cfg);

// ---- checkpoints -------------------------------------------------------------

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::vector<std::pair<std::string, Tensor>> tensors;  // float32 on disk
  std::string meta_json;  // config, epoch, RNG state, vocabulary, scaling
};

Checkpoint make_checkpoint(const PTINet& model, const TrainConfig& cfg, int epoch,
                           const std::string& rng_state, const AttributeVocabulary& vocab);
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct RestoredModel {
  TrainConfig config;
  AttributeVocabulary vocab;
  int epoch = 0;
  std::string rng_state;
  std::unique_ptr<PTINet> model;
};

RestoredModel restore_model(const Checkpoint& ckpt);

// Sets encoder input widths from the vocabulary.
ModelConfig model_config_for(const TrainConfig& cfg, const AttributeVocabulary& vocab);

// ---- training ----------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_traj = 0.0;
  double loss_int = 0.0;
  double val_ade = 0.0;  // NaN without a validation set
  double val_fde = 0.0;
  double val_f1 = 0.0;
  double val_acc = 0.0;

  std::string to_json() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep checkpoints in memory only
  std::ostream* log = nullptr;    // JSON lines as epochs finish
  std::ostream* progress = nullptr;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  Checkpoint last;
  Checkpoint best;
  int best_epoch = 0;
  std::unique_ptr<PTINet> model;  // state after the last epoch
};

TrainResult train(const TrainConfig& cfg, std::span<const PedestrianSample> train_set,
                  std::span<const PedestrianSample> val_set, const AttributeVocabulary& vocab,
                  const TrainOptions& options = {});

}  // namespace ptinet
