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

#include "ptinet/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "ptinet/data.hpp"
#include "ptinet/errors.hpp"
#include "ptinet/raster.hpp"

namespace ptinet {

int horizon_to_steps(double seconds) { return static_cast<int>(std::lround(seconds * 30.0)); }

std::vector<PredictionOutput> PtinetPredictor::predict(std::span<const PedestrianSample* const> samples,
                                                       int n) {
  if (n > model_.config().n) {
    throw ConfigError("model predicts " + std::to_string(model_.config().n) + " steps, " +
                      std::to_string(n) + " requested");
  }
  return model_.predict(samples);
}

std::vector<PredictionOutput> ConstantVelocityPredictor::predict(
    std::span<const PedestrianSample* const> samples, int n) {
  std::vector<PredictionOutput> out;
  for (const auto* raw : samples) {
    const PedestrianSample s = denormalize_sample(*raw);
    BoxVelocity v;
    const auto& vel = s.past.velocities;
    const double count = static_cast<double>(vel.size() > 1 ? vel.size() - 1 : 1);
    for (std::size_t t = 1; t < vel.size(); ++t) {
      v.dx += vel[t].dx / count;
      v.dy += vel[t].dy / count;
      v.dw += vel[t].dw / count;
      v.dh += vel[t].dh / count;
    }
    PredictionOutput p;
    BoundingBox b = s.past.positions.back();
    for (int j = 0; j < n; ++j) {
      b = b + v;
      p.boxes.push_back(b);
      p.intention_probs.push_back(0.0);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PredictionOutput> OraclePredictor::predict(std::span<const PedestrianSample* const> samples,
                                                       int n) {
  std::vector<PredictionOutput> out;
  for (const auto* raw : samples) {
    const PedestrianSample s = denormalize_sample(*raw);
    if (static_cast<int>(s.future_boxes.size()) < n) throw ShapeError("oracle: sample future too short");
    PredictionOutput p;
    p.boxes.assign(s.future_boxes.begin(), s.future_boxes.begin() + n);
    for (int j = 0; j < n; ++j) p.intention_probs.push_back(s.future_intentions[j]);
    out.push_back(std::move(p));
  }
  return out;
}

MetricReport evaluate(Predictor& predictor, std::span<const PedestrianSample> samples,
                      int trained_n, const EvalOptions& options) {
  if (samples.empty()) throw ShapeError("evaluate: no samples");
  if (trained_n < 1) throw ConfigError("evaluate: trained horizon must be positive");
  for (double h : options.horizons) {
    const int steps = horizon_to_steps(h);
    if (steps < 1) throw ConfigError("evaluate: horizon " + std::to_string(h) + " s is shorter than one step");
    if (steps > trained_n) {
      throw ConfigError("evaluate: horizon " + std::to_string(h) + " s needs " + std::to_string(steps) +
                        " steps but the model was trained for " + std::to_string(trained_n));
    }
    if (steps < trained_n && !options.allow_prefix) {
      throw ConfigError("evaluate: horizon " + std::to_string(h) + " s differs from the trained horizon; "
                        "enable prefix evaluation to use the rollout prefix");
    }
  }

  BoxTrajectories pred, gt;
  StepProbabilities probs;
  StepLabels labels;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<const PedestrianSample*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&samples[i]);
    const auto outs = predictor.predict(ptrs, trained_n);
    if (outs.size() != ptrs.size()) throw ShapeError("evaluate: predictor returned the wrong count");
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      const auto v = validate_prediction(outs[i], trained_n);
      if (!v) throw ShapeError("evaluate: invalid prediction: " + v.reason);
      const PedestrianSample s = denormalize_sample(*ptrs[i]);
      if (static_cast<int>(s.future_boxes.size()) < trained_n) {
        throw ShapeError("evaluate: sample " + s.pedestrian_id + " has a short future");
      }
      pred.emplace_back(outs[i].boxes.begin(), outs[i].boxes.begin() + trained_n);
      gt.emplace_back(s.future_boxes.begin(), s.future_boxes.begin() + trained_n);
      probs.emplace_back(outs[i].intention_probs.begin(), outs[i].intention_probs.begin() + trained_n);
      labels.emplace_back(s.future_intentions.begin(), s.future_intentions.begin() + trained_n);
    }
  }

  MetricReport report;
  report.sample_count = samples.size();
  for (double h : options.horizons) {
    const int steps = horizon_to_steps(h);
    BoxTrajectories p = pred, g = gt;
    for (auto& row : p) row.resize(steps);
    for (auto& row : g) row.resize(steps);
    report.ade_pixels[h] = ade(p, g, options.distance);
    report.fde_pixels[h] = fde(p, g, options.distance);
  }
  const auto cls = classification_report(probs, labels, 0.5, options.pooling);
  report.f1 = cls.f1;
  report.accuracy = cls.accuracy;
  return report;
}

Tensor render_qualitative_plot(const PedestrianSample& raw, const PredictionOutput& prediction,
                               const Tensor& backdrop) {
  const PedestrianSample s = denormalize_sample(raw);
  const ImageDims d = s.image_dims;
  Tensor canvas = backdrop.empty() ? raster::blank(d.height, d.width, {0.5, 0.5, 0.5})
                                   : resize_image(backdrop, d);
  if (prediction.boxes.empty() || s.future_boxes.empty()) {
    throw ShapeError("plot: empty prediction or ground truth");
  }
  const raster::Rgb red{1.0, 0.0, 0.0}, white{1.0, 1.0, 1.0}, blue{0.0, 0.3, 1.0};
  auto path = [&](const std::vector<BoundingBox>& boxes) {
    std::vector<std::array<double, 2>> pts{{s.past.positions.back().x, s.past.positions.back().y}};
    for (const auto& b : boxes) pts.push_back({b.x, b.y});
    return pts;
  };
  raster::dotted_polyline(canvas, path(s.future_boxes), blue, 4);
  raster::dotted_polyline(canvas, path(prediction.boxes), red, 4);
  raster::outline_box(canvas, s.future_boxes.back(), white, 1);
  raster::outline_box(canvas, prediction.boxes.back(), red, 1);

  const int n = static_cast<int>(prediction.intention_probs.size());
  const int base = d.height - kPlotMargin;
  raster::fill_rect(canvas, kPlotMargin - 1, base - kPlotBarMaxHeight - 1,
                    kPlotMargin + n * (kPlotBarWidth + 1), base + 1, {0.1, 0.1, 0.1});
  for (int j = 0; j < n; ++j) {
    const double p = std::clamp(prediction.intention_probs[j], 0.0, 1.0);
    const int height = static_cast<int>(std::lround(p * kPlotBarMaxHeight));
    const double x0 = kPlotMargin + j * (kPlotBarWidth + 1);
    raster::fill_rect(canvas, x0, base - height, x0 + kPlotBarWidth, base, {1.0, 0.6, 0.0});
  }
  return canvas;
}

void emit_qualitative_plot(const PedestrianSample& sample, const PredictionOutput& prediction,
                           const Tensor& backdrop, const std::filesystem::path& out_path) {
  raster::write_png(out_path, render_qualitative_plot(sample, prediction, backdrop));
}

}  // namespace ptinet
