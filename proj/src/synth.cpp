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

#include "ptinet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "ptinet/errors.hpp"
#include "ptinet/raster.hpp"

namespace ptinet::synth {
namespace {

constexpr double kMinWidthFrac = 0.042;
constexpr double kMaxWidthFrac = 0.075;
constexpr double kAspect = 2.4;

raster::Rgb phase_color(Phase p) {
  switch (p) {
    case Phase::kWalking:
      return {0.85, 0.25, 0.20};
    case Phase::kNodding:
      return {0.85, 0.75, 0.20};
    case Phase::kLooking:
      return {0.20, 0.80, 0.30};
    case Phase::kCrossing:
      return {0.20, 0.40, 0.90};
  }
  return {0, 0, 0};
}

double texture(double x, double y) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return 0.45 + 0.15 * std::sin(two_pi * x / 47.0) * std::cos(two_pi * y / 29.0) +
         0.08 * std::sin(two_pi * (x + y) / 83.0);
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& options) {
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return options[d(rng)];
}

// Pixel (i, j) of the render grid is inside the box when its center is, the
// same rule raster::fill_rect uses.
struct PixelSpan {
  int r0, r1, c0, c1;
};

PixelSpan box_pixels(const BoundingBox& b, double scale, ImageDims render) {
  auto lo = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
  PixelSpan s;
  s.c0 = std::max(0, lo((b.x - b.w / 2) * scale));
  s.c1 = std::min(render.width, lo((b.x + b.w / 2) * scale));
  s.r0 = std::max(0, lo((b.y - b.h / 2) * scale));
  s.r1 = std::min(render.height, lo((b.y + b.h / 2) * scale));
  return s;
}

double ego_offset_x(const Scenario& sc, int position) {
  return sc.config.ego_speed_x * position + 0.5 * sc.ego_accel * position * (position - 1);
}

std::string video_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v%04d", index);
  return buf;
}

}  // namespace

Phase PedestrianScript::phase_at(int position) const {
  if (!crossing) return Phase::kWalking;
  if (position >= turn_frame) return Phase::kCrossing;
  if (position >= switch_frame) return Phase::kLooking;
  if (position >= nod_start) return Phase::kNodding;
  return Phase::kWalking;
}

int label_from_script(const PedestrianScript& script, int position) {
  return script.crossing && position >= script.switch_frame ? 1 : 0;
}

void validate_config(const ScenarioConfig& c) {
  if (c.num_pedestrians < 1) throw GenerationError("num_pedestrians must be positive");
  if (c.frames_per_track < 2) throw GenerationError("frames_per_track must be at least 2");
  if (!(c.crossing_fraction >= 0.0 && c.crossing_fraction <= 1.0)) {
    throw GenerationError("crossing_fraction must lie in [0,1]");
  }
  if (c.image_dims.height <= 0 || c.image_dims.width <= 0) {
    throw GenerationError("image_dims must be positive");
  }
  if (!(c.render_scale > 0.0)) throw GenerationError("render_scale must be positive");
  if (c.noise_std < 0.0) throw GenerationError("noise_std must be non-negative");
  if (c.intent_lead < 1 || c.precue_frames < 0) {
    throw GenerationError("intent_lead must be positive and precue_frames non-negative");
  }
  if (!(c.annotation_noise >= 0.0 && c.annotation_noise <= 1.0)) {
    throw GenerationError("annotation_noise must lie in [0,1]");
  }
  const double max_w = kMaxWidthFrac * c.image_dims.height;
  if (c.num_pedestrians * (2.0 * max_w + 8.0) > c.image_dims.width) {
    throw GenerationError(std::to_string(c.num_pedestrians) +
                          " pedestrians do not fit side by side in width " +
                          std::to_string(c.image_dims.width));
  }
  if (c.crossing_fraction > 0.0 && c.frames_per_track < c.precue_frames + c.intent_lead + 3) {
    throw GenerationError("frames_per_track too short for the crossing script");
  }
}

Scenario generate_scenario(const ScenarioConfig& config) {
  validate_config(config);
  Scenario sc;
  sc.config = config;
  sc.render_dims = {std::max(1, static_cast<int>(std::lround(config.image_dims.height * config.render_scale))),
                    std::max(1, static_cast<int>(std::lround(config.image_dims.width * config.render_scale)))};

  std::mt19937_64 rng(config.seed);
  const int len = config.frames_per_track;
  const double H = config.image_dims.height;
  const double W = config.image_dims.width;
  const double slot = W / config.num_pedestrians;

  std::optional<CategoricalRecord> scene;
  if (config.scene_attributes) {
    const AttributeVocabulary vocab = vocabulary();
    CategoricalRecord rec;
    for (const auto& [field, values] : vocab.fields()) {
      if (AttributeVocabulary::group_of(field) == AttributeGroup::kScene) rec[field] = pick(rng, values);
    }
    scene = rec;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  sc.ego_accel = config.ego_accel_max * (2.0 * unit(rng) - 1.0);

  for (int p = 0; p < config.num_pedestrians; ++p) {
    PedestrianScript script;
    script.crossing = unit(rng) < config.crossing_fraction;
    const double w = H * (kMinWidthFrac + (kMaxWidthFrac - kMinWidthFrac) * unit(rng));
    const double h = kAspect * w;
    const double walk = (0.8 + 1.4 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    const double cross_speed = 1.2 + 1.0 * unit(rng);
    if (script.crossing) {
      const int lo = config.precue_frames + 1;
      const int hi = len - config.intent_lead - 2;
      std::uniform_int_distribution<int> when(lo, hi);
      script.switch_frame = when(rng);
      script.nod_start = script.switch_frame - config.precue_frames;
      script.turn_frame = script.switch_frame + config.intent_lead;
    }

    // Horizontal start keeps the walking phase inside the pedestrian's slot
    // when the walk is slow enough to allow it.
    const double travel = walk * (len - 1) + ego_offset_x(sc, len - 1);
    double x_lo = p * slot + w;
    double x_hi = (p + 1) * slot - w;
    if (travel > 0) x_hi = std::max(x_lo, x_hi - travel);
    else x_lo = std::min(x_hi, x_lo - travel);
    if (config.num_pedestrians == 1) {
      x_lo = std::clamp(w - std::min(travel, 0.0), w, W - w);
      x_hi = std::clamp(W - w - std::max(travel, 0.0), x_lo, W - w);
    }
    const double x0 = x_lo + (x_hi - x_lo) * unit(rng);
    const double y0 = H * (0.30 + 0.15 * unit(rng));

    script.true_boxes.resize(len);
    script.true_boxes[0] = {x0, y0, w, h};
    for (int k = 1; k < len; ++k) {
      const Phase phase = script.phase_at(k - 1);
      const bool slowed = phase == Phase::kLooking || phase == Phase::kCrossing;
      BoxVelocity v;
      v.dx = (slowed ? config.curb_slowdown * walk : walk) + ego_velocity_x(sc, k - 1);
      v.dy = (phase == Phase::kCrossing ? cross_speed : 0.0) + config.ego_speed_y;
      script.true_boxes[k] = script.true_boxes[k - 1] + v;
    }

    PedestrianTrack t;
    t.video_id = config.video_id;
    char pid[48];
    std::snprintf(pid, sizeof(pid), "%s_p%02d", config.video_id.c_str(), p);
    t.pedestrian_id = pid;
    t.image_dims = config.image_dims;
    t.frame_uri_template = "frames/" + config.video_id + "/%06d.png";
    const std::vector<std::string> ages{"child", "adult", "senior"};
    const std::vector<std::string> genders{"female", "male"};
    const std::vector<std::string> groups{"1", "2", "3+"};
    const std::vector<std::string> gestures{"none", "wave"};
    t.attrs_raw = {{"age", pick(rng, ages)}, {"gender", pick(rng, genders)}, {"group_size", pick(rng, groups)}};
    const std::string gesture = pick(rng, gestures);
    for (int k = 0; k < len; ++k) {
      t.frame_indices.push_back(config.first_frame + k);
      const BoundingBox& tb = script.true_boxes[k];
      BoundingBox ob{tb.x + config.noise_std * jitter(rng), tb.y + config.noise_std * jitter(rng),
                     tb.w + config.noise_std * jitter(rng), tb.h + config.noise_std * jitter(rng)};
      ob.w = std::max(ob.w, 1.0);
      ob.h = std::max(ob.h, 1.0);
      t.boxes.push_back(ob);
      t.intention_labels.push_back(label_from_script(script, k));

      const Phase phase = script.phase_at(k);
      bool nod = phase == Phase::kNodding;
      bool look = phase == Phase::kLooking;
      if (config.annotation_noise > 0.0) {
        // Always draw so the stream does not depend on the phase.
        const double miss = unit(rng);
        if (miss < config.annotation_noise) nod = look = false;
      }
      t.behavior_raw.push_back({{"look", look ? "looking" : "not-looking"},
                                {"nod", nod ? "nodding" : "none"},
                                {"gesture", gesture},
                                {"action", phase == Phase::kCrossing ? "crossing" : "walking"}});
    }
    if (scene) t.scene_raw = std::vector<CategoricalRecord>(static_cast<std::size_t>(len), *scene);
    sc.tracks.push_back(std::move(t));
    sc.scripts.push_back(std::move(script));
  }
  return sc;
}

double ego_velocity_x(const Scenario& sc, int position) {
  return sc.config.ego_speed_x + sc.ego_accel * position;
}

SceneState scene_state(const Scenario& sc, int position) {
  SceneState s;
  s.position = position;
  s.ego_offset_x = ego_offset_x(sc, position);
  s.ego_offset_y = sc.config.ego_speed_y * position;
  for (const auto& script : sc.scripts) {
    s.boxes.push_back(script.true_boxes.at(static_cast<std::size_t>(position)));
    s.phases.push_back(script.phase_at(position));
  }
  return s;
}

Tensor render_frame(const Scenario& sc, const SceneState& state) {
  const ImageDims r = sc.render_dims;
  const double scale = sc.config.render_scale;
  Tensor img(Shape{3, r.height, r.width});
  const std::size_t plane = static_cast<std::size_t>(r.height) * r.width;
  for (int i = 0; i < r.height; ++i) {
    for (int j = 0; j < r.width; ++j) {
      const double x = (j + 0.5) / scale - state.ego_offset_x;
      const double y = (i + 0.5) / scale - state.ego_offset_y;
      const double v = texture(x, y);
      const std::size_t at = static_cast<std::size_t>(i) * r.width + j;
      img[at] = v;
      img[plane + at] = 0.95 * v;
      img[2 * plane + at] = 0.9 * v;
    }
  }
  for (std::size_t p = 0; p < state.boxes.size(); ++p) {
    const auto span = box_pixels(state.boxes[p], scale, r);
    const auto color = phase_color(state.phases[p]);
    for (int i = span.r0; i < span.r1; ++i) {
      for (int j = span.c0; j < span.c1; ++j) raster::set_pixel(img, i, j, color);
    }
  }
  return img;
}

Tensor analytic_flow(const Scenario& sc, const SceneState& at, const SceneState& next) {
  const ImageDims r = sc.render_dims;
  const double scale = sc.config.render_scale;
  Tensor flow(Shape{2, r.height, r.width});
  const std::size_t plane = static_cast<std::size_t>(r.height) * r.width;
  const double bg_u = (next.ego_offset_x - at.ego_offset_x) * scale;
  const double bg_v = (next.ego_offset_y - at.ego_offset_y) * scale;
  std::fill_n(flow.data(), plane, bg_u);
  std::fill_n(flow.data() + plane, plane, bg_v);
  for (std::size_t p = 0; p < at.boxes.size(); ++p) {
    const double u = (next.boxes[p].x - at.boxes[p].x) * scale;
    const double v = (next.boxes[p].y - at.boxes[p].y) * scale;
    const auto span = box_pixels(at.boxes[p], scale, r);
    for (int i = span.r0; i < span.r1; ++i) {
      for (int j = span.c0; j < span.c1; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * r.width + j;
        flow[k] = u;
        flow[plane + k] = v;
      }
    }
  }
  return flow;
}

AttributeVocabulary vocabulary() {
  AttributeVocabulary v;
  v.add_field("age", {"child", "adult", "senior"});
  v.add_field("gender", {"female", "male"});
  v.add_field("group_size", {"1", "2", "3+"});
  v.add_field("look", {"not-looking", "looking"});
  v.add_field("nod", {"none", "nodding"});
  v.add_field("gesture", {"none", "wave"});
  v.add_field("action", {"walking", "crossing"});
  v.add_field("motion_dir", {"lateral", "longitudinal"});
  v.add_field("lanes", {"1", "2", "3", "4+"});
  v.add_field("sign", {"none", "stop", "yield"});
  v.add_field("crossing", {"none", "zebra"});
  v.add_field("road_type", {"street", "intersection"});
  v.add_field("signal", {"none", "red", "green"});
  return v;
}

void write_scenario_frames(const Scenario& sc, const std::filesystem::path& out_dir) {
  if (sc.tracks.empty()) return;
  const std::string pattern = sc.tracks.front().frame_uri_template;
  const std::string flow_pattern = flow_uri_pattern(pattern);
  const int len = sc.config.frames_per_track;
  std::filesystem::create_directories(
      (out_dir / format_frame_uri(pattern, sc.config.first_frame)).parent_path());
  SceneState state = scene_state(sc, 0);
  for (int k = 0; k < len; ++k) {
    const int frame = sc.config.first_frame + k;
    raster::write_png(out_dir / format_frame_uri(pattern, frame), render_frame(sc, state));
    if (k + 1 < len) {
      SceneState next = scene_state(sc, k + 1);
      write_flow_file(out_dir / format_frame_uri(flow_pattern, frame), analytic_flow(sc, state, next));
      state = std::move(next);
    }
  }
}

DatasetSummary generate_dataset(const ScenarioConfig& config, int num_videos,
                                const std::filesystem::path& out_dir) {
  if (num_videos < 1) throw GenerationError("num_videos must be positive");
  DatasetSummary summary;
  std::filesystem::create_directories(out_dir);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32)};
  std::vector<std::uint32_t> seeds(static_cast<std::size_t>(num_videos) * 2);
  seq.generate(seeds.begin(), seeds.end());
  for (int v = 0; v < num_videos; ++v) {
    ScenarioConfig c = config;
    c.video_id = video_name(v);
    c.seed = (static_cast<std::uint64_t>(seeds[2 * v]) << 32) | seeds[2 * v + 1];
    Scenario sc = generate_scenario(c);
    write_scenario_frames(sc, out_dir);
    for (auto& t : sc.tracks) summary.tracks.push_back(std::move(t));
  }
  summary.track_file = out_dir / "tracks.jsonl";
  summary.vocab_file = out_dir / "vocab.json";
  write_track_file(summary.track_file, summary.tracks);
  std::ofstream(summary.vocab_file) << vocabulary().to_json() << '\n';
  return summary;
}

}  // namespace ptinet::synth
