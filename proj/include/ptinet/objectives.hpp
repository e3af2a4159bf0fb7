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

// Training losses and evaluation metrics. Plain functions work on box and
// probability containers; the graph:: versions build differentiable scalars
// over batched Vars.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ptinet/domain.hpp"
#include "ptinet/encoders.hpp"

namespace ptinet {

struct LossConfig {
  double beta = 1.0;
  double lambda_traj = 1.0;
  double lambda_int = 1.0;
  double epsilon = 1e-7;
  bool reconstruction_reg = false;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct LatentGaussian {
  std::vector<double> mean;
  std::vector<double> log_var;
};

using BoxTrajectories = std::vector<std::vector<BoundingBox>>;  // N x n
using StepProbabilities = std::vector<std::vector<double>>;     // N x n
using StepLabels = std::vector<std::vector<int>>;               // N x n

double kl_diagonal_gaussian(const LatentGaussian& g);
double rmse_trajectory(const BoxTrajectories& pred, const BoxTrajectories& gt);
double trajectory_loss(const BoxTrajectories& pred, const BoxTrajectories& gt,
                       const std::vector<LatentGaussian>& latents, const LossConfig& cfg,
                       double reconstruction_nll = 0.0);
double intention_loss(const StepProbabilities& probs, const StepLabels& labels,
                      const LossConfig& cfg);
double total_loss(double traj_loss, double int_loss, const LossConfig& cfg);

enum class DistanceMode { kBox, kCenter };
double box_distance(const BoundingBox& a, const BoundingBox& b, DistanceMode mode = DistanceMode::kBox);
double ade(const BoxTrajectories& pred, const BoxTrajectories& gt,
           DistanceMode mode = DistanceMode::kBox);
double fde(const BoxTrajectories& pred, const BoxTrajectories& gt,
           DistanceMode mode = DistanceMode::kBox);

enum class IntentionPooling { kAllSteps, kFinalStep };

struct ClassificationReport {
  double f1 = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

ClassificationReport classification_report(const StepProbabilities& probs,
                                            const StepLabels& labels, double threshold = 0.5,
                                            IntentionPooling pooling = IntentionPooling::kAllSteps);

struct MetricReport {
  std::map<double, double> ade_pixels;  // keyed by horizon in seconds
  std::map<double, double> fde_pixels;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t sample_count = 0;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
  bool operator==(const MetricReport&) const = default;
};

namespace graph {

// Mean over rows of the per-row KL; rows with mask 0 contribute nothing.
Var kl(const LatentVars& g);
// pred [B, 4n] against gt [B, 4n].
Var rmse(const Var& pred, const Tensor& gt);
// probs [B, n] against 0/1 labels [B, n].
Var bce(const Var& probs, const Tensor& labels, double epsilon);
// Negative log-likelihood of targets under per-step diagonal Gaussians, summed
// over steps and components, mean over rows.
Var gaussian_nll(const std::vector<LatentVars>& steps, const std::vector<Var>& targets,
                 const Var& mask = Var());

}  // namespace graph

}  // namespace ptinet
