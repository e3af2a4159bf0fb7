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

// ptinet: synthetic data, training, evaluation and plotting from the shell.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptinet/errors.hpp"
#include "ptinet/raster.hpp"
#include "ptinet/synth.hpp"
#include "ptinet/training.hpp"

namespace fs = std::filesystem;
using namespace ptinet;

namespace {

struct TrainArgs {
  std::string preset = "default";
  std::string config_file;
  std::string data, val_data, out = "run";
  std::optional<int> epochs, batch_size;
  std::optional<double> lr, horizon;
  std::optional<std::uint64_t> seed;
  bool no_images = false, no_flow = false, no_scene = false;
  std::vector<std::string> overrides;
};

TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig cfg = a.preset == "desk" ? desk_preset() : TrainConfig{};
  if (!a.config_file.empty()) cfg = load_config_file(a.config_file, cfg);
  if (!a.data.empty()) cfg.data_dir = a.data;
  if (!a.val_data.empty()) cfg.val_dir = a.val_data;
  if (a.epochs) cfg.max_epoch = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.lr) cfg.lr_init = *a.lr;
  if (a.horizon) cfg.horizon_seconds = *a.horizon;
  if (a.seed) cfg.seed = *a.seed;
  if (a.no_images) cfg.encoder.use_images = false;
  if (a.no_flow) cfg.encoder.use_flow = false;
  if (a.no_scene) cfg.encoder.use_scene_attrs = false;
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = resolve_config(a);
  FrameCache cache;
  const DatasetSplit data = load_dataset(cfg, cache);
  std::cerr << "training on " << data.train.size() << " windows, validating on " << data.val.size() << "\n";
  fs::create_directories(a.out);
  std::ofstream(fs::path(a.out) / "config.txt") << format_config(cfg);
  std::ofstream log(fs::path(a.out) / "log.jsonl");
  TrainOptions opts;
  opts.out_dir = a.out;
  opts.log = &log;
  opts.progress = &std::cerr;
  const TrainResult r = train(cfg, data.train, data.val, data.vocab, opts);
  std::cout << "best epoch " << r.best_epoch << ", checkpoints in " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, predictor = "ptinet", out;
  std::vector<double> horizons;
  bool prefix = false, center = false, final_step = false;
};

std::vector<PedestrianSample> samples_for(const RestoredModel& r, const std::string& dir) {
  if (dir.empty()) throw ConfigError("--data is required");
  FrameCache cache;
  const auto tracks = read_track_file(fs::path(dir) / "tracks.jsonl");
  return build_samples(tracks, r.vocab, load_options(r.config), cache, dir);
}

int run_eval(const EvalArgs& a) {
  const RestoredModel r = restore_model(load_checkpoint(a.checkpoint));
  const auto samples = samples_for(r, a.data);
  std::unique_ptr<Predictor> predictor;
  if (a.predictor == "ptinet") predictor = std::make_unique<PtinetPredictor>(*r.model);
  else if (a.predictor == "constant-velocity") predictor = std::make_unique<ConstantVelocityPredictor>();
  else if (a.predictor == "oracle") predictor = std::make_unique<OraclePredictor>();
  else throw ConfigError("unknown predictor '" + a.predictor + "'");
  EvalOptions eo;
  eo.horizons = a.horizons.empty() ? std::vector<double>{r.config.horizon_seconds} : a.horizons;
  eo.allow_prefix = a.prefix || r.config.eval_prefix;
  eo.distance = a.center ? DistanceMode::kCenter : DistanceMode::kBox;
  eo.pooling = a.final_step ? IntentionPooling::kFinalStep : IntentionPooling::kAllSteps;
  const MetricReport report = evaluate(*predictor, samples, r.config.horizon_steps(), eo);
  std::cout << report.to_json() << "\n";
  if (!a.out.empty()) std::ofstream(a.out) << report.to_json() << "\n";
  return 0;
}

struct PlotArgs {
  std::string checkpoint, data, out = "plot.png";
  int sample = 0;
};

int run_plot(const PlotArgs& a) {
  const RestoredModel r = restore_model(load_checkpoint(a.checkpoint));
  const auto samples = samples_for(r, a.data);
  if (a.sample < 0 || a.sample >= static_cast<int>(samples.size())) {
    throw ConfigError("--sample " + std::to_string(a.sample) + " outside [0, " +
                      std::to_string(samples.size()) + ")");
  }
  const PedestrianSample& s = samples[static_cast<std::size_t>(a.sample)];
  const PedestrianSample* ptr = &s;
  const auto pred = r.model->predict(std::span(&ptr, 1)).front();
  // Backdrop at full stored resolution rather than the model's input size.
  Tensor backdrop;
  const auto tracks = read_track_file(fs::path(a.data) / "tracks.jsonl");
  for (const auto& t : tracks) {
    if (t.pedestrian_id == s.pedestrian_id && t.video_id == s.video_id) {
      backdrop = raster::read_png(fs::path(a.data) / format_frame_uri(t.frame_uri_template, s.anchor_frame));
      break;
    }
  }
  emit_qualitative_plot(s, pred, backdrop, a.out);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

int run_inspect(const std::string& dir, int m, double horizon, int stride) {
  const auto tracks = read_track_file(fs::path(dir) / "tracks.jsonl");
  const auto vocab = AttributeVocabulary::load(fs::path(dir) / "vocab.json");
  const int n = horizon_to_steps(horizon);
  std::size_t windows = 0, positives = 0, frames = 0, with_scene = 0;
  std::set<std::string> videos;
  for (const auto& t : tracks) {
    videos.insert(t.video_id);
    frames += t.length();
    if (t.scene_raw) ++with_scene;
    const auto ctx = encode_attributes(t, vocab);
    for (const auto& s : window_track(t, ctx, {m, n, stride})) {
      ++windows;
      for (int l : s.future_intentions) positives += static_cast<std::size_t>(l);
    }
  }
  std::cout << "videos " << videos.size() << "\ntracks " << tracks.size() << " (" << with_scene
            << " with scene attributes)\nframes " << frames << "\nwindows(m=" << m << ",n=" << n
            << ",stride=" << stride << ") " << windows << "\ncrossing labels "
            << (windows ? static_cast<double>(positives) / (windows * n) : 0.0) << "\nattribute widths p="
            << vocab.width(AttributeGroup::kPedestrian) << " b=" << vocab.width(AttributeGroup::kBehavior)
            << " s=" << vocab.width(AttributeGroup::kScene) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pedestrian trajectory and crossing-intention prediction"};
  app.require_subcommand(1);

  synth::ScenarioConfig sc;
  int videos = 8;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic scenes");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", sc.seed, "Base seed");
  synth_cmd->add_option("--videos", videos, "Number of videos")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--frames", sc.frames_per_track, "Frames per track");
  synth_cmd->add_option("--pedestrians", sc.num_pedestrians, "Pedestrians per video");
  synth_cmd->add_option("--crossing-fraction", sc.crossing_fraction);
  synth_cmd->add_option("--noise", sc.noise_std, "Box noise std in pixels");
  synth_cmd->add_option("--annotation-noise", sc.annotation_noise);
  synth_cmd->add_option("--height", sc.image_dims.height);
  synth_cmd->add_option("--width", sc.image_dims.width);
  synth_cmd->add_option("--render-scale", sc.render_scale, "Stored frame size relative to height/width");
  synth_cmd->add_option("--ego-speed", sc.ego_speed_x);
  synth_cmd->add_option("--ego-accel", sc.ego_accel_max, "Largest per-video ego acceleration");
  synth_cmd->add_option("--curb-slowdown", sc.curb_slowdown);
  synth_cmd->add_option("--intent-lead", sc.intent_lead);
  synth_cmd->add_option("--precue", sc.precue_frames);
  bool no_scene_attrs = false;
  synth_cmd->add_flag("--no-scene", no_scene_attrs, "Omit scene attributes");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", ta.data, "Dataset directory");
  train_cmd->add_option("--val-data", ta.val_data, "Validation dataset directory");
  train_cmd->add_option("--config", ta.config_file, "key=value config file");
  train_cmd->add_option("--preset", ta.preset, "default or desk")->check(CLI::IsMember({"default", "desk"}));
  train_cmd->add_option("--out", ta.out, "Run directory");
  train_cmd->add_option("--epochs", ta.epochs, "max_epoch");
  train_cmd->add_option("--batch-size", ta.batch_size);
  train_cmd->add_option("--lr", ta.lr, "lr_init");
  train_cmd->add_option("--horizon", ta.horizon, "horizon_seconds");
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_flag("--no-images", ta.no_images, "Zero the image path");
  train_cmd->add_flag("--no-flow", ta.no_flow, "Zero the optical-flow path");
  train_cmd->add_flag("--no-scene", ta.no_scene, "Zero the scene-attribute path");
  train_cmd->add_option("--set", ta.overrides, "Override any config key, key=value");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--data", ea.data)->required();
  eval_cmd->add_option("--predictor", ea.predictor, "ptinet, constant-velocity or oracle");
  eval_cmd->add_option("--horizons", ea.horizons, "Seconds");
  eval_cmd->add_flag("--prefix", ea.prefix, "Evaluate shorter horizons on the rollout prefix");
  eval_cmd->add_flag("--center-distance", ea.center, "ADE/FDE over box centers only");
  eval_cmd->add_flag("--final-step", ea.final_step, "Intention metrics on the last step only");
  eval_cmd->add_option("--out", ea.out, "Write the report JSON here too");

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plot", "Draw one prediction");
  plot_cmd->add_option("--checkpoint", pa.checkpoint)->required();
  plot_cmd->add_option("--data", pa.data)->required();
  plot_cmd->add_option("--sample", pa.sample);
  plot_cmd->add_option("--out", pa.out);

  std::string inspect_dir;
  int inspect_m = 16, inspect_stride = 1;
  double inspect_horizon = 0.5;
  auto* inspect_cmd = app.add_subcommand("inspect-data", "Summarize a dataset");
  inspect_cmd->add_option("--data", inspect_dir)->required();
  inspect_cmd->add_option("--m", inspect_m);
  inspect_cmd->add_option("--horizon", inspect_horizon);
  inspect_cmd->add_option("--stride", inspect_stride);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth_cmd) {
      sc.scene_attributes = !no_scene_attrs;
      const auto summary = synth::generate_dataset(sc, videos, synth_out);
      std::cout << "wrote " << summary.tracks.size() << " tracks to " << synth_out << "\n";
      return 0;
    }
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_eval(ea);
    if (*plot_cmd) return run_plot(pa);
    if (*inspect_cmd) return run_inspect(inspect_dir, inspect_m, inspect_horizon, inspect_stride);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
