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

// Deterministic synthetic street scenes: rendered frames, analytic optical
// flow, pedestrian tracks with attributes and crossing labels.
//
// Crossing pedestrians follow a fixed script: walk parallel to the road, nod
// for `precue_frames`, switch intention to "cross" and look toward the road
// for `intent_lead` frames while slowing down at the curb, then turn and walk
// toward the road edge. Non-crossing pedestrians only walk. The rendered fill color of each box
// shows the true script phase; the behavior annotations can be degraded with
// `annotation_noise`.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptinet/data.hpp"
#include "ptinet/domain.hpp"

namespace ptinet::synth {

struct ScenarioConfig {
  int num_pedestrians = 1;
  int frames_per_track = 60;
  ImageDims image_dims{240, 420};
  double crossing_fraction = 0.5;
  double ego_speed_x = 1.0;
  double ego_speed_y = 0.0;
  // Per-video ego acceleration drawn from U[-ego_accel_max, ego_accel_max],
  // image pixels per frame squared.
  double ego_accel_max = 0.0;
  // Fraction of the walking speed kept along the road once looking.
  double curb_slowdown = 0.3;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
  int intent_lead = 15;
  int precue_frames = 15;
  // Probability that a frame's nod/look annotation is missed.
  double annotation_noise = 0.0;
  // Frames and flow are stored at image_dims * render_scale; boxes stay in
  // image_dims pixels.
  double render_scale = 1.0;
  bool scene_attributes = true;
  std::string video_id = "v0000";
  int first_frame = 0;
};

enum class Phase { kWalking = 0, kNodding = 1, kLooking = 2, kCrossing = 3 };

struct PedestrianScript {
  bool crossing = false;
  int nod_start = -1;     // track positions; -1 when not crossing
  int switch_frame = -1;  // first position labelled 1
  int turn_frame = -1;    // first position moving toward the road
  std::vector<BoundingBox> true_boxes;

  Phase phase_at(int position) const;
};

struct Scenario {
  ScenarioConfig config;
  ImageDims render_dims;
  double ego_accel = 0.0;
  std::vector<PedestrianTrack> tracks;
  std::vector<PedestrianScript> scripts;
};

struct SceneState {
  int position = 0;  // index within the scenario's frames
  double ego_offset_x = 0.0;
  double ego_offset_y = 0.0;
  std::vector<BoundingBox> boxes;  // true boxes, source pixels
  std::vector<Phase> phases;
};

void validate_config(const ScenarioConfig& config);

Scenario generate_scenario(const ScenarioConfig& config);
SceneState scene_state(const Scenario& scenario, int position);
// Background displacement from position to position + 1.
double ego_velocity_x(const Scenario& scenario, int position);

// [3,Hr,Wr] frame in [0,1].
Tensor render_frame(const Scenario& scenario, const SceneState& state);

// [2,Hr,Wr] flow from `at` to `next` in render pixels: background carries the
// ego translation, pixels inside a pedestrian's box at `at` carry that
// pedestrian's center displacement.
Tensor analytic_flow(const Scenario& scenario, const SceneState& at, const SceneState& next);

// Intention label at a track position re-derived from the script timestamps.
int label_from_script(const PedestrianScript& script, int position);

AttributeVocabulary vocabulary();

// Writes frames/<video>/%06d.png and the matching .ptfl flow files under
// out_dir. Track frame_uri values are relative to out_dir.
void write_scenario_frames(const Scenario& scenario, const std::filesystem::path& out_dir);

struct DatasetSummary {
  std::vector<PedestrianTrack> tracks;
  std::filesystem::path track_file;
  std::filesystem::path vocab_file;
};

// num_videos scenarios with per-video seeds derived from config.seed, written
// as out_dir/tracks.jsonl, out_dir/vocab.json and the frame tree.
DatasetSummary generate_dataset(const ScenarioConfig& config, int num_videos,
                                const std::filesystem::path& out_dir);

}  // namespace ptinet::synth
