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
#include <random>

#include "doctest.h"
#include "ptinet/data.hpp"
#include "ptinet/domain.hpp"
#include "ptinet/errors.hpp"
#include "ptinet/raster.hpp"

using namespace ptinet;
namespace fs = std::filesystem;

namespace {

PedestrianTrack make_track(int len, bool scene = true) {
  PedestrianTrack t;
  t.video_id = "v1";
  t.pedestrian_id = "v1_p00";
  t.image_dims = {240, 420};
  t.frame_uri_template = "frames/v1/%06d.png";
  t.attrs_raw = {{"age", "adult"}, {"gender", "male"}, {"group_size", "1"}};
  for (int k = 0; k < len; ++k) {
    t.frame_indices.push_back(100 + k);
    t.boxes.push_back({50.0 + 1.5 * k, 80.0 + 0.25 * k, 20.0, 40.0 + 0.1 * k});
    t.intention_labels.push_back(k > len / 2 ? 1 : 0);
    t.behavior_raw.push_back({{"look", k % 3 == 0 ? "looking" : "not-looking"}, {"action", "walking"}});
  }
  if (scene) t.scene_raw = std::vector<CategoricalRecord>(static_cast<std::size_t>(len), {{"lanes", "2"}});
  return t;
}

AttributeVocabulary small_vocab() {
  AttributeVocabulary v;
  v.add_field("age", {"child", "adult", "senior"});
  v.add_field("gender", {"female", "male"});
  v.add_field("group_size", {"1", "2", "3+"});
  v.add_field("look", {"not-looking", "looking"});
  v.add_field("action", {"walking", "crossing"});
  v.add_field("lanes", {"1", "2", "3+"});
  return v;
}

PedestrianSample valid_sample(int m, int n) {
  const PedestrianTrack t = make_track(m + n + 4);
  auto samples = window_track(t, encode_attributes(t, small_vocab()), {m, n, 1});
  return samples.front();
}

}  // namespace

TEST_SUITE("domain") {
  TEST_CASE("velocities are frame differences with a leading zero") {
    const std::vector<BoundingBox> a{{10, 10, 5, 5}, {12, 13, 5, 5}};
    const auto va = compute_velocities(a);
    CHECK(va == std::vector<BoxVelocity>{{0, 0, 0, 0}, {2, 3, 0, 0}});

    const std::vector<BoundingBox> b{{0, 0, 1, 1}, {1, 0, 2, 1}, {1, 2, 2, 3}};
    CHECK(compute_velocities(b) == std::vector<BoxVelocity>{{0, 0, 0, 0}, {1, 0, 1, 0}, {0, 2, 0, 2}});

    const std::vector<BoundingBox> flat(5, BoundingBox{3, 4, 5, 6});
    for (const auto& v : compute_velocities(flat)) CHECK(v == BoxVelocity{});
  }

  TEST_CASE("too-short sequences are rejected") {
    const std::vector<BoundingBox> one{{1, 1, 1, 1}};
    CHECK_THROWS_AS(compute_velocities(one), InvalidSequenceError);
  }

  TEST_CASE("cumulative velocities reconstruct positions exactly") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> step(-8, 8);
    std::vector<BoundingBox> pos{{100, 100, 30, 60}};
    for (int k = 1; k < 40; ++k) {
      pos.push_back(pos.back() + BoxVelocity{step(rng) * 0.25, step(rng) * 0.5, step(rng) * 0.125, step(rng) * 0.25});
    }
    const auto vel = compute_velocities(pos);
    BoundingBox acc = pos[0];
    for (std::size_t k = 1; k < pos.size(); ++k) {
      acc = acc + vel[k];
      CHECK(acc == pos[k]);
    }
  }

  TEST_CASE("validation accepts well-formed samples and names the first violation") {
    PedestrianSample s = valid_sample(16, 15);
    CHECK(validate_sample(s, 16, 15).ok);

    PedestrianSample bad_box = s;
    bad_box.past.positions[3].w = 0.0;
    bad_box.past.velocities = compute_velocities(bad_box.past.positions);
    auto r = validate_sample(bad_box, 16, 15);
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "degenerate box");

    PedestrianSample bad_flow = s;
    auto frame = std::make_shared<const Tensor>(Shape{3, 4, 5});
    auto flow = std::make_shared<const Tensor>(Shape{2, 4, 5});
    bad_flow.global_ctx.images.assign(16, frame);
    bad_flow.global_ctx.flows.assign(16, flow);
    r = validate_sample(bad_flow, 16, 15);
    CHECK_FALSE(r.ok);
    CHECK(r.reason == "flow count mismatch");

    bad_flow.global_ctx.flows.resize(15);
    CHECK(validate_sample(bad_flow, 16, 15).ok);

    PedestrianSample short_future = s;
    short_future.future_boxes.pop_back();
    CHECK(validate_sample(short_future, 16, 15).reason == "future length mismatch");

  }

  TEST_CASE("prediction validation checks lengths and probability range") {
    PredictionOutput p;
    p.boxes.assign(3, BoundingBox{1, 1, 1, 1});
    p.intention_probs = {0.0, 0.5, 1.0};
    CHECK(validate_prediction(p, 3).ok);
    p.intention_probs[1] = 1.5;
    CHECK_FALSE(validate_prediction(p, 3).ok);
  }
}

TEST_SUITE("data") {
  TEST_CASE("track file round trip is lossless") {
    std::vector<PedestrianTrack> tracks{make_track(20), make_track(33, false)};
    tracks[1].pedestrian_id = "v1_p01";
    tracks[1].boxes[4].x = 0.1 + 0.2;  // not exactly representable in short decimal
    const std::string text = emit_track_file(tracks);
    CHECK(parse_track_file(text) == tracks);
    CHECK(parse_track_file(emit_track_file(parse_track_file(text))) == tracks);
  }

  TEST_CASE("parsing edge cases") {
    CHECK(parse_track_file("").empty());
    const auto one = parse_track_file(emit_track_file({make_track(20)}));
    REQUIRE(one.size() == 1);
    CHECK(one[0].boxes.size() == 20);

    // Unknown keys are ignored.
    std::string line = emit_track_file({make_track(20)});
    line.insert(1, "\"extra\":[1,2,3],");
    CHECK(parse_track_file(line).size() == 1);
  }

  TEST_CASE("schema and parse errors") {
    PedestrianTrack t = make_track(20);
    t.intention_labels.pop_back();
    CHECK_THROWS_AS(parse_track_file(emit_track_file({t})), SchemaError);

    const std::string good = emit_track_file({make_track(20)});
    try {
      parse_track_file(good + "\n{not json\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("one-hot encoding follows the declared field order") {
    const AttributeVocabulary v = small_vocab();
    CHECK(v.encode(AttributeGroup::kPedestrian, {{"age", "adult"}}) ==
          std::vector<double>{0, 1, 0, 0, 0, 0, 0, 0});
    CHECK(v.encode(AttributeGroup::kBehavior, {}) == std::vector<double>(4, 0.0));
    CHECK(v.width(AttributeGroup::kScene) == 3);
    try {
      v.encode(AttributeGroup::kPedestrian, {{"age", "toddler"}});
      FAIL("expected an encoding error");
    } catch (const EncodingError& e) {
      CHECK(e.field() == "age");
      CHECK(e.value() == "toddler");
    }
  }

  TEST_CASE("vocabulary JSON keeps field order") {
    AttributeVocabulary v;
    v.add_field("look", {"not-looking", "looking"});
    v.add_field("action", {"walking", "crossing"});
    const auto back = AttributeVocabulary::from_json(v.to_json());
    CHECK(back == v);
    CHECK(back.fields().front().first == "look");
  }

  TEST_CASE("encoded context shapes") {
    const PedestrianTrack t = make_track(25, false);
    const auto ctx = encode_attributes(t, small_vocab());
    CHECK(ctx.pedestrian_attrs.size() == 8);
    CHECK(ctx.behavior.size() == 25);
    CHECK_FALSE(ctx.scene.has_value());
  }

  TEST_CASE("window count examples") {
    CHECK(expected_window_count(100, 16, 45, 1) == 40);
    CHECK(expected_window_count(30, 16, 15, 1) == 0);
    CHECK(expected_window_count(61, 16, 15, 5) == 7);
  }

  TEST_CASE("windowing matches brute-force enumeration for every small track") {
    const AttributeVocabulary vocab = small_vocab();
    for (int len = 2; len <= 40; len += 3) {
      const PedestrianTrack t = make_track(len);
      const auto ctx = encode_attributes(t, vocab);
      for (int m : {2, 5, 16}) {
        for (int n : {1, 4, 15}) {
          for (int stride : {1, 2, 7}) {
            std::size_t brute = 0;
            for (int anchor = m - 1; anchor + n <= len - 1; anchor += stride) ++brute;
            const auto w = window_track(t, ctx, {m, n, stride});
            CHECK(w.size() == brute);
            CHECK(w.size() == expected_window_count(len, m, n, stride));
          }
        }
      }
    }
  }

  TEST_CASE("windows carry the right slices and validate") {
    const PedestrianTrack t = make_track(40);
    const auto w = window_track(t, encode_attributes(t, small_vocab()), {16, 15, 3});
    REQUIRE(!w.empty());
    for (const auto& s : w) {
      CHECK(validate_sample(s, 16, 15).ok);
      const int first = s.anchor_index - 15;
      CHECK(s.past.positions.front() == t.boxes[first]);
      CHECK(s.future_boxes.back() == t.boxes[s.anchor_index + 15]);
      CHECK(s.future_intentions.front() == t.intention_labels[s.anchor_index + 1]);
      CHECK(s.anchor_frame == t.frame_indices[s.anchor_index]);
    }
  }

  TEST_CASE("windows spanning a frame gap are dropped") {
    PedestrianTrack t = make_track(40);
    for (std::size_t k = 20; k < t.frame_indices.size(); ++k) t.frame_indices[k] += 5;
    const auto w = window_track(t, encode_attributes(t, small_vocab()), {5, 3, 1});
    for (const auto& s : w) {
      const bool before = s.anchor_index + 3 < 20;
      const bool after = s.anchor_index - 4 >= 20;
      CHECK((before || after));
    }
    CHECK(w.size() == (20 - 8 + 1) + (20 - 8 + 1));
  }

  TEST_CASE("normalization") {
    PedestrianSample s = valid_sample(4, 2);
    s.image_dims = {1080, 1920};
    CHECK(normalize_sample(s, s.image_dims, Normalization::kNone).past == s.past);

    const BoundingBox u = from_pixels({960, 540, 100, 200}, {1080, 1920}, Normalization::kScaleToUnit);
    CHECK(u.x == doctest::Approx(0.5));
    CHECK(u.y == doctest::Approx(0.5));
    CHECK(u.w == doctest::Approx(100.0 / 1920.0));
    CHECK(u.h == doctest::Approx(200.0 / 1080.0));

    const PedestrianSample n = normalize_sample(s, s.image_dims, Normalization::kScaleToUnit);
    const PedestrianSample back = denormalize_sample(n);
    for (std::size_t k = 0; k < s.past.positions.size(); ++k) {
      CHECK(back.past.positions[k].x == doctest::Approx(s.past.positions[k].x).epsilon(1e-9));
      CHECK(back.past.velocities[k].dh == doctest::Approx(s.past.velocities[k].dh).epsilon(1e-9));
    }
    CHECK(back.future_boxes.back().w == doctest::Approx(s.future_boxes.back().w).epsilon(1e-9));
    CHECK_THROWS(normalize_sample(s, {0, 10}, Normalization::kScaleToUnit));
  }

  TEST_CASE("flow files round trip and reject bad magic") {
    Tensor flow(Shape{2, 3, 4});
    for (std::size_t i = 0; i < flow.size(); ++i) flow[i] = 0.5 * static_cast<double>(i) - 3.0;
    const std::string bytes = encode_flow(flow);
    CHECK(bytes.substr(0, 4) == "PTFL");
    CHECK(bytes.size() == 12 + 24 * 4);
    CHECK(decode_flow(bytes) == flow);
    CHECK_THROWS_AS(decode_flow("XXXX" + bytes.substr(4)), IoError);
  }

  TEST_CASE("frame URIs") {
    CHECK(format_frame_uri("frames/v0001/%06d.png", 42) == "frames/v0001/000042.png");
    CHECK(flow_uri_pattern("frames/v0001/%06d.png") == "frames/v0001/%06d.ptfl");
  }

  TEST_CASE("resizing flow rescales each component by its axis ratio") {
    Tensor flow(Shape{2, 4, 6});
    for (int i = 0; i < 24; ++i) {
      flow[static_cast<std::size_t>(i)] = 3.0;
      flow[static_cast<std::size_t>(24 + i)] = -2.0;
    }
    const Tensor r = resize_flow(flow, {8, 3});
    for (int i = 0; i < 24; ++i) {
      CHECK(r[static_cast<std::size_t>(i)] == doctest::Approx(1.5));
      CHECK(r[static_cast<std::size_t>(24 + i)] == doctest::Approx(-4.0));
    }
  }

  TEST_CASE("global context loading, toggles and missing files") {
    const fs::path dir = fs::temp_directory_path() / "ptinet_unit_ctx";
    fs::remove_all(dir);
    fs::create_directories(dir / "frames/v1");
    PedestrianTrack t = make_track(8);
    for (int f : t.frame_indices) {
      raster::write_png(dir / format_frame_uri(t.frame_uri_template, f), raster::blank(12, 20, {0.2, 0.4, 0.6}));
      Tensor flow(Shape{2, 12, 20}, 1.0);
      write_flow_file(dir / format_frame_uri(flow_uri_pattern(t.frame_uri_template), f), flow);
    }
    FrameCache cache;
    const GlobalContext g = load_global_context(t, 5, 4, {6, 10}, {true, true}, cache, dir);
    REQUIRE(g.images.size() == 4);
    REQUIRE(g.flows.size() == 3);
    CHECK(g.images[0]->shape() == Shape{3, 6, 10});
    CHECK(g.flows[0]->shape() == Shape{2, 6, 10});
    for (double v : g.images[2]->values().subspan(0, 60)) CHECK(v == doctest::Approx(0.2).epsilon(0.01));
    CHECK((*g.flows[0])[0] == doctest::Approx(0.5));

    const GlobalContext off = load_global_context(t, 5, 4, {6, 10}, {true, false}, cache, dir);
    REQUIRE(off.flows.size() == 3);
    CHECK(off.flows[1]->shape() == Shape{2, 6, 10});
    CHECK(max_abs(*off.flows[1]) == 0.0);

    fs::remove(dir / format_frame_uri(t.frame_uri_template, 103));
    FrameCache fresh;
    try {
      load_global_context(t, 5, 4, {6, 10}, {true, true}, fresh, dir);
      FAIL("expected an IO error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("000103.png") != std::string::npos);
    }
    fs::remove_all(dir);
  }
}
