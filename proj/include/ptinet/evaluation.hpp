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

// Predictors, the metric evaluator and the qualitative plot.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ptinet/model.hpp"
#include "ptinet/objectives.hpp"

namespace ptinet {

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  // At least n future steps per sample.
  virtual std::vector<PredictionOutput> predict(std::span<const PedestrianSample* const> samples,
                                                int n) = 0;
};

class PtinetPredictor : public Predictor {
 public:
  explicit PtinetPredictor(const PTINet& model) : model_(model) {}
  std::string name() const override { return "ptinet"; }
  std::vector<PredictionOutput> predict(std::span<const PedestrianSample* const> samples,
                                        int n) override;

 private:
  const PTINet& model_;
};

// Extrapolates the mean observed velocity; never predicts crossing.
class ConstantVelocityPredictor : public Predictor {
 public:
  std::string name() const override { return "constant-velocity"; }
  std::vector<PredictionOutput> predict(std::span<const PedestrianSample* const> samples,
                                        int n) override;
};

// Returns the ground truth.
class OraclePredictor : public Predictor {
 public:
  std::string name() const override { return "oracle"; }
  std::vector<PredictionOutput> predict(std::span<const PedestrianSample* const> samples,
                                        int n) override;
};

struct EvalOptions {
  std::vector<double> horizons{0.5};
  bool allow_prefix = false;
  DistanceMode distance = DistanceMode::kBox;
  IntentionPooling pooling = IntentionPooling::kAllSteps;
  int batch_size = 32;
};

// trained_n is the number of steps the predictor was trained for. A horizon
// longer than trained_n is an error; a shorter one needs allow_prefix.
// Classification metrics cover the trained_n steps.
MetricReport evaluate(Predictor& predictor, std::span<const PedestrianSample> samples,
                      int trained_n, const EvalOptions& options);

int horizon_to_steps(double seconds);

// Draws on a copy of backdrop ([3,h,w], resized to the sample's image dims;
// empty gives a gray canvas): final ground-truth box white, final predicted
// box red, ground-truth path blue dotted, predicted path red dotted, and a
// bar per future step along the bottom-left edge whose height is the
// crossing probability.
Tensor render_qualitative_plot(const PedestrianSample& sample, const PredictionOutput& prediction,
                               const Tensor& backdrop);
void emit_qualitative_plot(const PedestrianSample& sample, const PredictionOutput& prediction,
                           const Tensor& backdrop, const std::filesystem::path& out_path);

inline constexpr int kPlotBarWidth = 3;
inline constexpr int kPlotBarMaxHeight = 40;
inline constexpr int kPlotMargin = 4;

}  // namespace ptinet
