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
#include "ptinet/encoders.hpp"
#include "ptinet/errors.hpp"
#include "test_support.hpp"

using namespace ptinet;
using namespace ptinet::testing;

namespace {

Tensor slice_cols(const Tensor& t, int begin, int width) {
  Tensor out(Shape{t.dim(0), width});
  for (int r = 0; r < t.dim(0); ++r) {
    for (int c = 0; c < width; ++c) out.at(r, c) = t.at(r, begin + c);
  }
  return out;
}

std::vector<Var> consts(const std::vector<Tensor>& ts) {
  std::vector<Var> out;
  for (const auto& t : ts) out.push_back(constant(t));
  return out;
}

// Scalar readout with fixed random weights so every output entry matters.
Var readout(const Var& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(x * constant(random_tensor(x.shape(), rng)));
}

}  // namespace

TEST_SUITE("encoders") {
  TEST_CASE("zero-parameter LSTM-VAE gives a standard-normal posterior") {
    ParamStore store;
    const auto vae = add_lstm_vae(store, "t", 8, 6, 2, 3);
    std::mt19937_64 rng(1);
    std::vector<Tensor> seq;
    for (int k = 0; k < 5; ++k) seq.push_back(random_tensor({2, 8}, rng));
    const Tensor noise = random_tensor({2, 3}, rng);
    const auto train = lstm_vae_encode(vae, consts(seq), Mode::kTrain, noise);
    CHECK(max_abs(train.mean.value()) == 0.0);
    CHECK(max_abs(train.log_var.value()) == 0.0);
    CHECK(train.z.value() == noise);
    const auto eval = lstm_vae_encode(vae, consts(seq), Mode::kEval, noise);
    CHECK(max_abs(eval.z.value()) == 0.0);
  }

  TEST_CASE("LSTM-VAE eval mode is deterministic and zero noise returns the mean") {
    ParamStore store;
    const auto vae = add_lstm_vae(store, "t", 8, 6, 2, 3);
    store.initialize(4);
    std::mt19937_64 rng(2);
    std::vector<Tensor> seq;
    for (int k = 0; k < 5; ++k) seq.push_back(random_tensor({2, 8}, rng));
    const auto a = lstm_vae_encode(vae, consts(seq), Mode::kEval, Tensor());
    const auto b = lstm_vae_encode(vae, consts(seq), Mode::kEval, Tensor());
    CHECK(a.z.value() == b.z.value());
    CHECK(a.z.value() == a.mean.value());
    const auto c = lstm_vae_encode(vae, consts(seq), Mode::kTrain, Tensor(Shape{2, 3}));
    CHECK(c.z.value() == c.mean.value());
    CHECK_THROWS_AS(lstm_vae_encode(vae, consts({random_tensor({2, 7}, rng)}), Mode::kEval, Tensor()), ShapeError);
  }

  TEST_CASE("reparameterize examples") {
    const Var mean = constant(Tensor(Shape{1, 3}, std::vector<double>{0.5, -1.0, 2.0}));
    const Tensor eps(Shape{1, 3}, std::vector<double>{0.3, -0.2, 1.0});
    const Var z = reparameterize(mean, constant(Tensor(Shape{1, 3})), eps);
    for (int i = 0; i < 3; ++i) CHECK(z.value()[i] == doctest::Approx(mean.value()[i] + eps[i]));

    const Var z4 = reparameterize(constant(Tensor(Shape{1, 2})), constant(Tensor(Shape{1, 2}, std::log(4.0))),
                                  Tensor(Shape{1, 2}, 0.5));
    CHECK(z4.value()[0] == doctest::Approx(1.0));
    CHECK(z4.value()[1] == doctest::Approx(1.0));

    const Var z0 = reparameterize(mean, constant(Tensor(Shape{1, 3}, 1.7)), Tensor(Shape{1, 3}));
    CHECK(z0.value() == mean.value());
    CHECK_THROWS_AS(reparameterize(mean, mean, Tensor(Shape{1, 2})), ShapeError);
  }

  TEST_CASE("reparameterized samples have the posterior moments") {
    const int draws = 10000;
    const std::vector<double> mu{0.3, -1.2, 2.5};
    const std::vector<double> lv{0.0, std::log(0.25), std::log(3.0)};
    Tensor mean(Shape{draws, 3}), log_var(Shape{draws, 3}), eps(Shape{draws, 3});
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int r = 0; r < draws; ++r) {
      for (int c = 0; c < 3; ++c) {
        mean.at(r, c) = mu[c];
        log_var.at(r, c) = lv[c];
        eps.at(r, c) = normal(rng);
      }
    }
    const Tensor z = reparameterize(constant(mean), constant(log_var), eps).value();
    for (int c = 0; c < 3; ++c) {
      double s = 0, ss = 0;
      for (int r = 0; r < draws; ++r) s += z.at(r, c);
      const double m = s / draws;
      for (int r = 0; r < draws; ++r) ss += (z.at(r, c) - m) * (z.at(r, c) - m);
      const double var = ss / (draws - 1);
      const double sigma = std::exp(lv[c] / 2);
      CHECK(std::abs(m - mu[c]) <= 4 * sigma / std::sqrt(draws));
      CHECK(std::abs(var - std::exp(lv[c])) <= 0.1 * std::exp(lv[c]));
    }
  }

  TEST_CASE("sequence reconstruction unrolls the requested length") {
    ParamStore store;
    const auto dec = add_lstm_vae_decoder(store, "r", 3, 6, 2, 8);
    std::mt19937_64 rng(5);
    const Var z = constant(random_tensor({2, 3}, rng));
    for (int m : {1, 16}) {
      const auto seq = lstm_vae_reconstruct(dec, z, m);
      CHECK(seq.size() == static_cast<std::size_t>(m));
      for (const auto& s : seq) {
        CHECK(max_abs(s.mean.value()) == 0.0);
        CHECK(max_abs(s.log_var.value()) == 0.0);
      }
    }
    store.initialize(3);
    const auto a = lstm_vae_reconstruct(dec, z, 4);
    const auto b = lstm_vae_reconstruct(dec, z, 4);
    for (int k = 0; k < 4; ++k) CHECK(a[k].mean.value() == b[k].mean.value());
    CHECK(a[3].mean.shape() == Shape{2, 8});
  }

  TEST_CASE("attribute MLP") {
    ParamStore store;
    const auto relu_mlp = add_mlp(store, "a", 7, 64, 64, Activation::kRelu);
    const auto lin_mlp = add_mlp(store, "b", 7, 64, 64, Activation::kIdentity);
    std::mt19937_64 rng(6);
    const Tensor a = random_tensor({3, 7}, rng), b = random_tensor({3, 7}, rng);
    CHECK(max_abs(mlp_encode(relu_mlp, constant(a)).value()) == 0.0);
    store.initialize(8);
    CHECK(mlp_encode(relu_mlp, constant(a)).shape() == Shape{3, 64});

    Tensor ab = a;
    ab += b;
    const Tensor fa = mlp_encode(lin_mlp, constant(a)).value();
    const Tensor fb = mlp_encode(lin_mlp, constant(b)).value();
    const Tensor f0 = mlp_encode(lin_mlp, constant(Tensor(Shape{3, 7}))).value();
    const Tensor fab = mlp_encode(lin_mlp, constant(ab)).value();
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] + fb[i] - f0[i] == doctest::Approx(fab[i]).epsilon(1e-12));
    CHECK_THROWS_AS(mlp_encode(lin_mlp, constant(Tensor(Shape{3, 6}))), ShapeError);
  }

  TEST_CASE("ConvLSTM trace and layout at default sizes") {
    const EncoderConfig c;
    const auto trace = conv_lstm_trace(c);
    REQUIRE(trace.size() == 3);
    CHECK(trace[0] == ImageDims{60, 105});
    CHECK(trace[1] == ImageDims{15, 26});
    CHECK(trace[2] == ImageDims{4, 6});
    const auto layout = feature_layout(c);
    CHECK(layout.total == 640);
    int at = 0;
    for (int i = 0; i < kPathCount; ++i) {
      CHECK(layout.offset[i] == at);
      at += layout.width[i];
    }
    CHECK(at == layout.total);
    ParamStore store;
    const auto p = add_conv_lstm(store, "gf_img", c);
    CHECK(store.get("gf_img.fc.w").shape() == Shape{32 * 4 * 6, 256});
    (void)p;

    EncoderConfig tiny = c;
    tiny.image_dims = {8, 8};
    CHECK_THROWS_AS(conv_lstm_trace(tiny), ConfigError);
  }

  TEST_CASE("ConvLSTM zero parameters and temporal sensitivity") {
    const EncoderConfig c = mini_encoder_config();
    ParamStore store;
    const auto p = add_conv_lstm(store, "gf_img", c);
    std::mt19937_64 rng(7);
    std::vector<Tensor> frames;
    for (int k = 0; k < 3; ++k) frames.push_back(random_tensor({2, 3, 16, 28}, rng, 0.0, 1.0));
    CHECK(max_abs(conv_lstm_forward(p, consts(frames), c).value()) == 0.0);
    store.initialize(12);
    const Tensor a = conv_lstm_forward(p, consts(frames), c).value();
    CHECK(a.shape() == Shape{2, c.gf_img_dim});
    std::swap(frames[0], frames[2]);
    const Tensor b = conv_lstm_forward(p, consts(frames), c).value();
    CHECK(max_abs([&] { Tensor d = a; d *= -1.0; d += b; return d; }()) > 1e-9);
  }

  TEST_CASE("flow backbone zero input, permutation invariance and width") {
    for (FlowBackbone kind : {FlowBackbone::kSmallCnn, FlowBackbone::kResidual50}) {
      EncoderConfig c = mini_encoder_config();
      c.flow_backbone = kind;
      c.resnet_width = 2;
      c.image_dims = {32, 32};
      ParamStore store;
      const auto p = add_flow_backbone(store, "gf_o", c);
      if (kind == FlowBackbone::kResidual50) CHECK(p.units.size() == 16);
      store.initialize(5);
      // Biases start at zero, so a zero field stays zero.
      const Tensor zero = flow_backbone_forward(p, constant(Tensor(Shape{4, 2, 32, 32})), 2).value();
      CHECK(zero.shape() == Shape{2, c.gf_o_dim});
      CHECK(max_abs(zero) == 0.0);

      std::mt19937_64 rng(8);
      Tensor flows = random_tensor({6, 2, 32, 32}, rng, -2, 2);
      const Tensor a = flow_backbone_forward(p, constant(flows), 3).value();
      // Swap frames 0 and 2 of sample 0.
      const std::size_t frame = 2 * 32 * 32;
      std::swap_ranges(flows.data(), flows.data() + frame, flows.data() + 2 * frame);
      const Tensor b = flow_backbone_forward(p, constant(flows), 3).value();
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("fusion widths, latents and ablation segments") {
    const EncoderConfig c = mini_encoder_config();
    ParamStore store;
    const auto p = add_encoder(store, c);
    store.initialize(21);
    std::mt19937_64 rng(9);
    const EncoderInput in = random_encoder_input(c, 2, 4, rng);
    const auto full = encode_batch(p, c, in, Mode::kEval, zero_noise(2, c.latent_dim));
    CHECK(full.fused.shape() == Shape{2, feature_layout(c).total});
    CHECK(full.latents.size() == 3);
    for (double v : full.fused.value().values()) CHECK(std::isfinite(v));

    const auto again = encode_batch(p, c, in, Mode::kEval, zero_noise(2, c.latent_dim));
    CHECK(again.fused.value() == full.fused.value());

    EncoderConfig no_img = c;
    no_img.use_images = false;
    const auto ablated = encode_batch(p, no_img, in, Mode::kEval, zero_noise(2, c.latent_dim));
    const auto& L = full.layout;
    for (int i = 0; i < kPathCount; ++i) {
      const Tensor a = slice_cols(full.fused.value(), L.offset[i], L.width[i]);
      const Tensor b = slice_cols(ablated.fused.value(), L.offset[i], L.width[i]);
      if (static_cast<Path>(i) == Path::kGfImg) {
        CHECK(max_abs(b) == 0.0);
        CHECK(max_abs(a) > 0.0);
      } else {
        CHECK(a == b);
      }
    }

    const EncoderInput no_scene = random_encoder_input(c, 2, 4, rng, false);
    const auto titan = encode_batch(p, c, no_scene, Mode::kEval, zero_noise(2, c.latent_dim));
    CHECK(titan.latents.size() == 2);
    CHECK(max_abs(slice_cols(titan.fused.value(), L.begin(Path::kLcfS), L.size(Path::kLcfS))) == 0.0);
  }

  TEST_CASE("path errors name the failing path") {
    const EncoderConfig c = mini_encoder_config();
    ParamStore store;
    const auto p = add_encoder(store, c);
    std::mt19937_64 rng(10);
    EncoderInput in = random_encoder_input(c, 2, 3, rng);
    in.pedestrian = Tensor(Shape{2, 3});
    try {
      encode_batch(p, c, in, Mode::kEval, zero_noise(2, c.latent_dim));
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("lcf_p") != std::string::npos);
    }
    in = random_encoder_input(c, 2, 3, rng);
    in.flows = Tensor();
    CHECK_THROWS_WITH_AS(encode_batch(p, c, in, Mode::kEval, zero_noise(2, c.latent_dim)),
                         doctest::Contains("gf_o"), ShapeError);
  }

  TEST_CASE("outputs stay finite for parameters bounded by one") {
    const EncoderConfig c = mini_encoder_config();
    ParamStore store;
    const auto p = add_encoder(store, c);
    std::mt19937_64 rng(13);
    for (const auto& e : store.entries()) {
      Var v = e.var;
      v.mutable_value() = random_tensor(v.shape(), rng);
    }
    const EncoderInput in = random_encoder_input(c, 2, 5, rng);
    const auto out = encode_batch(p, c, in, Mode::kTrain, random_noise(2, c.latent_dim, rng));
    CHECK(all_finite(out.fused.value()));
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("every encoder path matches finite differences") {
    const EncoderConfig c = mini_encoder_config();
    ParamStore store;
    const auto p = add_encoder(store, c);
    store.initialize(31);
    std::mt19937_64 rng(14);
    const EncoderInput in = random_encoder_input(c, 2, 3, rng);
    const EncoderNoise noise = random_noise(2, c.latent_dim, rng);

    SUBCASE("pv") {
      auto f = [&] { return readout(lstm_vae_encode(p.pv, consts(in.pv), Mode::kTrain, noise.pv).z, 1); };
      CHECK(directional_grad_error(all_params(store), f, 100) < 1e-4);
    }
    SUBCASE("lcf_p") {
      auto f = [&] { return readout(mlp_encode(p.pedestrian, constant(in.pedestrian)), 2); };
      CHECK(directional_grad_error(all_params(store), f, 101) < 1e-4);
    }
    SUBCASE("lcf_b") {
      auto f = [&] {
        return readout(lstm_vae_encode(p.behavior, consts(in.behavior), Mode::kTrain, noise.behavior).z, 3);
      };
      CHECK(directional_grad_error(all_params(store), f, 102) < 1e-4);
    }
    SUBCASE("lcf_s") {
      auto f = [&] { return readout(lstm_vae_encode(p.scene, consts(in.scene), Mode::kTrain, noise.scene).z, 4); };
      CHECK(directional_grad_error(all_params(store), f, 103) < 1e-4);
    }
    SUBCASE("gf_img") {
      auto f = [&] { return readout(conv_lstm_forward(p.images, consts(in.images), c), 5); };
      CHECK(directional_grad_error(all_params(store), f, 104) < 1e-4);
    }
    SUBCASE("gf_o") {
      auto f = [&] { return readout(flow_backbone_forward(p.flow, constant(in.flows), 2), 6); };
      CHECK(directional_grad_error(all_params(store), f, 105) < 1e-4);
    }
    SUBCASE("fused feature") {
      auto f = [&] { return readout(encode_batch(p, c, in, Mode::kTrain, noise).fused, 7); };
      CHECK(directional_grad_error(all_params(store), f, 106) < 1e-4);
    }
  }
}
