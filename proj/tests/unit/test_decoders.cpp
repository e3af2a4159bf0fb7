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

#include <cmath>
#include <random>

#include "doctest.h"
#include "ptinet/decoders.hpp"
#include "ptinet/errors.hpp"
#include "test_support.hpp"

using namespace ptinet;
using namespace ptinet::testing;

namespace {

constexpr int kHidden = 6;

struct Fixture {
  ParamStore store;
  DecoderParams p;
  Var fused;
  Tensor last_box;

  explicit Fixture(std::uint64_t seed) {
    p = add_decoders(store, kHidden);
    store.initialize(seed);
    std::mt19937_64 rng(seed + 1);
    fused = leaf(random_tensor({2, kHidden}, rng));
    last_box = Tensor(Shape{2, 4}, std::vector<double>{10, 10, 5, 5, 40, 30, 8, 16});
  }
};

void set(Var v, std::vector<double> values) { v.mutable_value() = Tensor(v.shape(), std::move(values)); }

}  // namespace

TEST_SUITE("decoders") {
  TEST_CASE("zero output head keeps the last box") {
    Fixture fx(1);
    fx.p.w_o.mutable_value().fill(0.0);
    const Tensor out = decode_trajectory(fx.p, fx.fused, fx.last_box, 4, {}, {}).value();
    CHECK(out.shape() == Shape{2, 16});
    for (int b = 0; b < 2; ++b) {
      for (int j = 0; j < 4; ++j) {
        for (int c = 0; c < 4; ++c) CHECK(out.at(b, 4 * j + c) == fx.last_box.at(b, c));
      }
    }
  }

  TEST_CASE("constant offset accumulates") {
    Fixture fx(2);
    fx.p.w_o.mutable_value().fill(0.0);
    set(fx.p.b_o, {1, 0, 0, 0});
    const Tensor out = decode_trajectory(fx.p, fx.fused, fx.last_box, 3, {}, {}).value();
    CHECK(out.at(0, 0) == 11.0);
    CHECK(out.at(0, 4) == 12.0);
    CHECK(out.at(0, 8) == 13.0);
    CHECK(out.at(0, 9) == 10.0);
  }

  TEST_CASE("scaling maps offsets through the velocity statistics") {
    Fixture fx(3);
    fx.p.w_o.mutable_value().fill(0.0);
    set(fx.p.b_o, {1, 0, 0, 0});
    BoxScaling s;
    s.vel_mean = {0.5, 0.25, 0, 0};
    s.vel_std = {2, 1, 1, 1};
    const Tensor out = decode_trajectory(fx.p, fx.fused, fx.last_box, 2, s, {}).value();
    CHECK(out.at(0, 0) == doctest::Approx(12.5));
    CHECK(out.at(0, 5) == doctest::Approx(10.5));
  }

  TEST_CASE("rollouts are prefixes of longer rollouts") {
    Fixture fx(4);
    for (bool coupled : {false, true}) {
      DecoderConfig cfg;
      cfg.couple_intention = coupled;
      const Var t1 = decode_trajectory(fx.p, fx.fused, fx.last_box, 1, {}, cfg);
      const Var t5 = decode_trajectory(fx.p, fx.fused, fx.last_box, 5, {}, cfg);
      const Tensor i2 = decode_intention(fx.p, fx.fused, fx.last_box, 2, {}, cfg, t1).value();
      const Tensor i5 = decode_intention(fx.p, fx.fused, fx.last_box, 5, {}, cfg, t5).value();
      for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 4; ++c) CHECK(t1.value().at(b, c) == t5.value().at(b, c));
        CHECK(i2.at(b, 0) == i5.at(b, 0));
        if (!coupled) CHECK(i2.at(b, 1) == i5.at(b, 1));
      }
    }
  }

  TEST_CASE("intention probabilities") {
    Fixture fx(5);
    const Tensor p5 = decode_intention(fx.p, fx.fused, fx.last_box, 5, {}, {}).value();
    CHECK(p5.shape() == Shape{2, 5});
    for (double v : p5.values()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    CHECK(decode_intention(fx.p, fx.fused, fx.last_box, 5, {}, {}).value() == p5);

    // Adding a constant to both logits changes nothing.
    set(fx.p.b_oi, {7.5, 7.5});
    const Tensor shifted = decode_intention(fx.p, fx.fused, fx.last_box, 5, {}, {}).value();
    for (std::size_t i = 0; i < p5.size(); ++i) CHECK(std::abs(shifted[i] - p5[i]) < 1e-12);

    fx.p.w_oi.mutable_value().fill(0.0);
    set(fx.p.b_oi, {0, 0});
    const Tensor flat = decode_intention(fx.p, fx.fused, fx.last_box, 5, {}, {}).value();
    for (double v : flat.values()) CHECK(v == 0.5);
  }

  TEST_CASE("two-logit softmax gives the crossing component") {
    const double c = std::log(3.0);
    for (double a : {-4.0, 0.0, 2.5}) {
      const Var logits = constant(Tensor(Shape{1, 2}, std::vector<double>{a, a + c}));
      CHECK(crossing_probability(logits).item() == doctest::Approx(0.75).epsilon(1e-12));
    }
  }

  TEST_CASE("width mismatch is a shape error") {
    Fixture fx(6);
    const Var wrong = constant(Tensor(Shape{2, kHidden + 1}));
    CHECK_THROWS_AS(decode_trajectory(fx.p, wrong, fx.last_box, 3, {}, {}), ShapeError);
    CHECK_THROWS_AS(decode_intention(fx.p, wrong, fx.last_box, 3, {}, {}), ShapeError);
  }

  TEST_CASE("long rollouts stay finite") {
    Fixture fx(7);
    std::mt19937_64 rng(70);
    for (const auto& e : fx.store.entries()) {
      Var v = e.var;
      v.mutable_value() = random_tensor(v.shape(), rng);
    }
    CHECK(all_finite(decode_trajectory(fx.p, fx.fused, fx.last_box, 45, {}, {}).value()));
    CHECK(all_finite(decode_intention(fx.p, fx.fused, fx.last_box, 45, {}, {}).value()));
  }

  TEST_CASE("absolute head emits boxes directly") {
    Fixture fx(8);
    fx.p.w_o.mutable_value().fill(0.0);
    set(fx.p.b_o, {3, 4, 5, 6});
    DecoderConfig cfg;
    cfg.absolute_position = true;
    const Tensor out = decode_trajectory(fx.p, fx.fused, fx.last_box, 2, {}, cfg).value();
    CHECK(out.at(1, 4) == 3.0);
    CHECK(out.at(1, 7) == 6.0);
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("both decoders match finite differences") {
    Fixture fx(9);
    BoxScaling s;
    s.pos_mean = {20, 20, 6, 10};
    s.pos_std = {10, 5, 2, 4};
    s.vel_std = {1.5, 0.5, 0.1, 0.2};
    std::vector<Var> leaves = all_params(fx.store);
    leaves.push_back(fx.fused);
    std::mt19937_64 rng(90);
    const Var w_traj = constant(random_tensor({2, 16}, rng));
    const Var w_int = constant(random_tensor({2, 4}, rng));
    for (bool coupled : {false, true}) {
      DecoderConfig cfg;
      cfg.couple_intention = coupled;
      auto traj = [&] { return sum(decode_trajectory(fx.p, fx.fused, fx.last_box, 4, s, cfg) * w_traj); };
      auto inten = [&] {
        const Var boxes = decode_trajectory(fx.p, fx.fused, fx.last_box, 4, s, cfg);
        return sum(decode_intention(fx.p, fx.fused, fx.last_box, 4, s, cfg, boxes) * w_int);
      };
      CHECK(directional_grad_error(leaves, traj, 200) < 1e-4);
      CHECK(directional_grad_error(leaves, inten, 201) < 1e-4);
    }
  }
}
