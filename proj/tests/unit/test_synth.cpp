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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ptinet/data.hpp"
#include "ptinet/errors.hpp"
#include "ptinet/synth.hpp"

using namespace ptinet;
namespace fs = std::filesystem;

namespace {

synth::ScenarioConfig small_config(std::uint64_t seed) {
  synth::ScenarioConfig c;
  c.num_pedestrians = 2;
  c.frames_per_track = 40;
  c.render_scale = 0.1;
  c.seed = seed;
  c.intent_lead = 8;
  c.precue_frames = 6;
  return c;
}

// Scenario with hand-placed boxes and no randomness.
synth::Scenario manual_scenario(double ego_x, BoxVelocity ped_step, int frames) {
  synth::Scenario sc;
  sc.config.image_dims = {40, 60};
  sc.config.render_scale = 1.0;
  sc.config.ego_speed_x = ego_x;
  sc.render_dims = {40, 60};
  synth::PedestrianScript s;
  BoundingBox b{20, 20, 6, 10};
  for (int k = 0; k < frames; ++k) {
    s.true_boxes.push_back(b);
    b = b + ped_step;
  }
  sc.scripts.push_back(s);
  return sc;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("same seed gives identical scenarios, different seeds differ") {
    const auto a = synth::generate_scenario(small_config(3));
    const auto b = synth::generate_scenario(small_config(3));
    const auto c = synth::generate_scenario(small_config(4));
    CHECK(a.tracks == b.tracks);
    CHECK(synth::render_frame(a, synth::scene_state(a, 7)) == synth::render_frame(b, synth::scene_state(b, 7)));
    CHECK_FALSE(a.tracks == c.tracks);
  }

  TEST_CASE("dataset files are byte-identical across runs with the same seed") {
    const fs::path d1 = fs::temp_directory_path() / "ptinet_synth_a";
    const fs::path d2 = fs::temp_directory_path() / "ptinet_synth_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    auto cfg = small_config(9);
    cfg.frames_per_track = 20;
    synth::generate_dataset(cfg, 2, d1);
    synth::generate_dataset(cfg, 2, d2);
    CHECK(read_all(d1 / "tracks.jsonl") == read_all(d2 / "tracks.jsonl"));
    CHECK(read_all(d1 / "vocab.json") == read_all(d2 / "vocab.json"));
    CHECK(read_all(d1 / "frames/v0001/000013.png") == read_all(d2 / "frames/v0001/000013.png"));
    CHECK(read_all(d1 / "frames/v0000/000004.ptfl") == read_all(d2 / "frames/v0000/000004.ptfl"));

    // Tracks reparse and every window validates.
    const auto tracks = read_track_file(d1 / "tracks.jsonl");
    CHECK(tracks.size() == 4);
    const auto vocab = AttributeVocabulary::load(d1 / "vocab.json");
    for (const auto& t : tracks) {
      for (const auto& s : window_track(t, encode_attributes(t, vocab), {4, 3, 2})) {
        CHECK(validate_sample(s, 4, 3).ok);
      }
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
  }

  TEST_CASE("crossing fraction extremes") {
    auto none = small_config(1);
    none.crossing_fraction = 0.0;
    none.num_pedestrians = 4;
    for (const auto& t : synth::generate_scenario(none).tracks) {
      for (int l : t.intention_labels) CHECK(l == 0);
    }
    auto all = small_config(2);
    all.crossing_fraction = 1.0;
    all.num_pedestrians = 4;
    all.intent_lead = 15;
    all.precue_frames = 15;
    all.frames_per_track = 60;
    for (const auto& t : synth::generate_scenario(all).tracks) {
      int transitions = 0;
      for (std::size_t k = 1; k < t.intention_labels.size(); ++k) {
        CHECK(t.intention_labels[k] >= t.intention_labels[k - 1]);
        transitions += t.intention_labels[k] != t.intention_labels[k - 1];
      }
      CHECK(transitions == 1);
    }
  }

  TEST_CASE("labels match the script timestamps and the turn follows the lead") {
    auto cfg = small_config(5);
    cfg.crossing_fraction = 1.0;
    cfg.noise_std = 0.0;
    const auto sc = synth::generate_scenario(cfg);
    for (std::size_t p = 0; p < sc.tracks.size(); ++p) {
      const auto& script = sc.scripts[p];
      CHECK(script.turn_frame - script.switch_frame == cfg.intent_lead);
      for (int k = 0; k < cfg.frames_per_track; ++k) {
        const int expected = (script.crossing && k >= script.switch_frame) ? 1 : 0;
        CHECK(sc.tracks[p].intention_labels[static_cast<std::size_t>(k)] == expected);
      }
      // No vertical motion before the turn, downward afterwards.
      const auto& b = script.true_boxes;
      CHECK(b[static_cast<std::size_t>(script.turn_frame)].y == b[0].y);
      CHECK(b.back().y > b[0].y);
      // Behavior annotations follow the phase.
      const auto& beh = sc.tracks[p].behavior_raw;
      CHECK(beh[static_cast<std::size_t>(script.switch_frame)].at("look") == "looking");
      CHECK(beh[static_cast<std::size_t>(script.nod_start)].at("nod") == "nodding");
      CHECK(beh[static_cast<std::size_t>(script.turn_frame)].at("action") == "crossing");
    }
  }

  TEST_CASE("scene attributes are constant within a scenario") {
    const auto sc = synth::generate_scenario(small_config(6));
    for (const auto& t : sc.tracks) {
      REQUIRE(t.scene_raw.has_value());
      for (const auto& rec : *t.scene_raw) CHECK(rec == t.scene_raw->front());
    }
    auto no_scene = small_config(6);
    no_scene.scene_attributes = false;
    CHECK_FALSE(synth::generate_scenario(no_scene).tracks[0].scene_raw.has_value());
  }

  TEST_CASE("unsatisfiable configs are rejected") {
    auto crowded = small_config(1);
    crowded.num_pedestrians = 40;
    CHECK_THROWS_AS(synth::generate_scenario(crowded), GenerationError);
    auto bad_fraction = small_config(1);
    bad_fraction.crossing_fraction = 1.5;
    CHECK_THROWS_AS(synth::generate_scenario(bad_fraction), GenerationError);
    auto short_track = small_config(1);
    short_track.frames_per_track = 10;
    CHECK_THROWS_AS(synth::generate_scenario(short_track), GenerationError);
  }

  TEST_CASE("analytic flow examples") {
    const auto still = manual_scenario(0.0, {0, 0, 0, 0}, 3);
    CHECK(max_abs(synth::analytic_flow(still, synth::scene_state(still, 0), synth::scene_state(still, 1))) == 0.0);

    auto ego = manual_scenario(2.0, {0, 0, 0, 0}, 3);
    ego.scripts.clear();
    const Tensor f = synth::analytic_flow(ego, synth::scene_state(ego, 0), synth::scene_state(ego, 1));
    const std::size_t plane = 40 * 60;
    for (std::size_t i = 0; i < plane; ++i) {
      CHECK(f[i] == 2.0);
      CHECK(f[plane + i] == 0.0);
    }

    const auto walker = manual_scenario(0.0, {1, 1, 0, 0}, 3);
    const Tensor g = synth::analytic_flow(walker, synth::scene_state(walker, 0), synth::scene_state(walker, 1));
    // Box (20,20,6,10) covers columns 17..22 and rows 15..24.
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 60; ++j) {
        const bool inside = i >= 15 && i < 25 && j >= 17 && j < 23;
        const std::size_t k = static_cast<std::size_t>(i) * 60 + j;
        CHECK(g[k] == (inside ? 1.0 : 0.0));
        CHECK(g[plane + k] == (inside ? 1.0 : 0.0));
      }
    }
  }

  TEST_CASE("mean flow over a box matches the observed velocity within the box noise") {
    auto cfg = small_config(8);
    cfg.render_scale = 1.0;
    cfg.image_dims = {120, 210};
    cfg.noise_std = 0.3;
    cfg.ego_accel_max = 0.05;
    const auto sc = synth::generate_scenario(cfg);
    const std::size_t plane = 120 * 210;
    for (int k : {3, 17, 30}) {
      const auto at = synth::scene_state(sc, k);
      const auto next = synth::scene_state(sc, k + 1);
      const Tensor f = synth::analytic_flow(sc, at, next);
      for (std::size_t p = 0; p < sc.tracks.size(); ++p) {
        const BoundingBox& b = at.boxes[p];
        double su = 0, sv = 0;
        int count = 0;
        for (int i = 0; i < 120; ++i) {
          for (int j = 0; j < 210; ++j) {
            if (j + 0.5 >= b.x - b.w / 2 && j + 0.5 < b.x + b.w / 2 && i + 0.5 >= b.y - b.h / 2 &&
                i + 0.5 < b.y + b.h / 2) {
              su += f[static_cast<std::size_t>(i) * 210 + j];
              sv += f[plane + static_cast<std::size_t>(i) * 210 + j];
              ++count;
            }
          }
        }
        REQUIRE(count > 0);
        const auto& obs = sc.tracks[p].boxes;
        const BoxVelocity v = obs[static_cast<std::size_t>(k + 1)] - obs[static_cast<std::size_t>(k)];
        // Difference of two noisy boxes: allow a few standard deviations.
        CHECK(std::abs(su / count - v.dx) < 6 * cfg.noise_std);
        CHECK(std::abs(sv / count - v.dy) < 6 * cfg.noise_std);
      }
    }
  }

  TEST_CASE("rendered boxes are filled with the phase color over a textured background") {
    auto sc = manual_scenario(1.0, {0, 0, 0, 0}, 3);
    const Tensor a = synth::render_frame(sc, synth::scene_state(sc, 0));
    const Tensor b = synth::render_frame(sc, synth::scene_state(sc, 2));
    CHECK(a.shape() == Shape{3, 40, 60});
    CHECK_FALSE(a == b);  // background moved
    const std::size_t inside = 20 * 60 + 20;
    CHECK(a[inside] == b[inside]);
    for (double v : a.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
