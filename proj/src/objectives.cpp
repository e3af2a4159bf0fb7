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

#include "ptinet/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

void check_trajectories(const BoxTrajectories& pred, const BoxTrajectories& gt, const char* what) {
  check_pair(pred.size(), gt.size(), what);
  if (pred.empty()) throw ShapeError(std::string(what) + ": no samples");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    check_pair(pred[i].size(), gt[i].size(), what);
    if (pred[i].empty()) throw ShapeError(std::string(what) + ": empty trajectory");
  }
}

double squared_norm(const BoundingBox& a, const BoundingBox& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dw = a.w - b.w, dh = a.h - b.h;
  return dx * dx + dy * dy + dw * dw + dh * dh;
}

std::string horizon_key(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", seconds);
  return buf;
}

}  // namespace

void LossConfig::validate() const {
  if (!(beta >= 0.0) || !(lambda_traj >= 0.0) || !(lambda_int >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("loss.epsilon must lie in (0, 0.5)");
}

double kl_diagonal_gaussian(const LatentGaussian& g) {
  check_pair(g.mean.size(), g.log_var.size(), "kl_diagonal_gaussian");
  double s = 0.0;
  for (std::size_t d = 0; d < g.mean.size(); ++d) {
    const double mu = g.mean[d];
    const double lv = g.log_var[d];
    if (!std::isfinite(mu) || !std::isfinite(lv)) throw NumericError("kl_diagonal_gaussian: non-finite input");
    s += std::exp(lv) + mu * mu - 1.0 - lv;
  }
  return 0.5 * s;
}

double rmse_trajectory(const BoxTrajectories& pred, const BoxTrajectories& gt) {
  check_trajectories(pred, gt, "rmse_trajectory");
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred[i].size(); ++j) s += squared_norm(pred[i][j], gt[i][j]);
    count += pred[i].size();
  }
  return std::sqrt(s / static_cast<double>(count));
}

double trajectory_loss(const BoxTrajectories& pred, const BoxTrajectories& gt,
                       const std::vector<LatentGaussian>& latents, const LossConfig& cfg,
                       double reconstruction_nll) {
  double kl = 0.0;
  for (const auto& g : latents) kl += kl_diagonal_gaussian(g);
  double loss = cfg.beta * kl + rmse_trajectory(pred, gt);
  if (cfg.reconstruction_reg) loss += reconstruction_nll;
  return loss;
}

double intention_loss(const StepProbabilities& probs, const StepLabels& labels,
                      const LossConfig& cfg) {
  check_pair(probs.size(), labels.size(), "intention_loss");
  if (probs.empty()) throw ShapeError("intention_loss: no samples");
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    check_pair(probs[i].size(), labels[i].size(), "intention_loss");
    for (std::size_t j = 0; j < probs[i].size(); ++j) {
      const double p = std::clamp(probs[i][j], cfg.epsilon, 1.0 - cfg.epsilon);
      s += labels[i][j] ? std::log(p) : std::log(1.0 - p);
    }
    count += probs[i].size();
  }
  return -s / static_cast<double>(count);
}

double total_loss(double traj_loss, double int_loss, const LossConfig& cfg) {
  return cfg.lambda_traj * traj_loss + cfg.lambda_int * int_loss;
}

double box_distance(const BoundingBox& a, const BoundingBox& b, DistanceMode mode) {
  if (mode == DistanceMode::kCenter) return std::hypot(a.x - b.x, a.y - b.y);
  return std::sqrt(squared_norm(a, b));
}

double ade(const BoxTrajectories& pred, const BoxTrajectories& gt, DistanceMode mode) {
  check_trajectories(pred, gt, "ade");
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred[i].size(); ++j) s += box_distance(pred[i][j], gt[i][j], mode);
    count += pred[i].size();
  }
  return s / static_cast<double>(count);
}

double fde(const BoxTrajectories& pred, const BoxTrajectories& gt, DistanceMode mode) {
  check_trajectories(pred, gt, "fde");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += box_distance(pred[i].back(), gt[i].back(), mode);
  return s / static_cast<double>(pred.size());
}

ClassificationReport classification_report(const StepProbabilities& probs,
                                            const StepLabels& labels, double threshold,
                                            IntentionPooling pooling) {
  check_pair(probs.size(), labels.size(), "classification_report");
  ClassificationReport r;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    check_pair(probs[i].size(), labels[i].size(), "classification_report");
    const std::size_t first = pooling == IntentionPooling::kFinalStep && !probs[i].empty() ? probs[i].size() - 1 : 0;
    for (std::size_t j = first; j < probs[i].size(); ++j) {
      const bool predicted = probs[i][j] >= threshold;
      const bool actual = labels[i][j] != 0;
      if (predicted && actual) ++r.tp;
      else if (predicted) ++r.fp;
      else if (actual) ++r.fn;
      else ++r.tn;
    }
  }
  const std::size_t total = r.tp + r.fp + r.tn + r.fn;
  r.accuracy = total ? static_cast<double>(r.tp + r.tn) / static_cast<double>(total) : 0.0;
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.tp + r.fp > 0 && r.tp + r.fn > 0 && r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["ade_pixels"] = nlohmann::ordered_json::object();
  j["fde_pixels"] = nlohmann::ordered_json::object();
  for (const auto& [h, v] : ade_pixels) j["ade_pixels"][horizon_key(h)] = v;
  for (const auto& [h, v] : fde_pixels) j["fde_pixels"][horizon_key(h)] = v;
  j["f1"] = f1;
  j["accuracy"] = accuracy;
  j["sample_count"] = sample_count;
  return j.dump();
}

MetricReport MetricReport::from_json(const std::string& text) {
  MetricReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.at("ade_pixels").items()) r.ade_pixels[std::stod(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("fde_pixels").items()) r.fde_pixels[std::stod(k)] = v.get<double>();
    r.f1 = j.at("f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.sample_count = j.at("sample_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("metric report: ") + e.what());
  }
  return r;
}

namespace graph {

Var kl(const LatentVars& g) {
  const int batch = g.mean.dim(0);
  const Var per_row = scale(
      sum_columns(add_scalar(exp(g.log_var) + square(g.mean) - g.log_var, -1.0)), 0.5);
  const Var weighted = g.mask.defined() ? mul_column(per_row, g.mask) : per_row;
  return scale(sum(weighted), 1.0 / batch);
}

Var rmse(const Var& pred, const Tensor& gt) {
  require_same_shape(pred.value(), gt, "rmse");
  if (pred.value().rank() != 2 || pred.dim(1) % 4 != 0) {
    throw ShapeError("rmse: expected [B,4n], got " + shape_string(pred.shape()));
  }
  const double count = static_cast<double>(pred.dim(0)) * (pred.dim(1) / 4);
  return sqrt(scale(sum(square(pred - constant(gt))), 1.0 / count));
}

Var bce(const Var& probs, const Tensor& labels, double epsilon) {
  require_same_shape(probs.value(), labels, "bce");
  const Var p = clamp(probs, epsilon, 1.0 - epsilon);
  Tensor negatives = labels;
  for (double& v : negatives.values()) v = 1.0 - v;
  const Var ll = log(p) * constant(labels) + log(add_scalar(scale(p, -1.0), 1.0)) * constant(negatives);
  return scale(mean(ll), -1.0);
}

Var gaussian_nll(const std::vector<LatentVars>& steps, const std::vector<Var>& targets,
                 const Var& mask) {
  if (steps.size() != targets.size() || steps.empty()) {
    throw ShapeError("gaussian_nll: " + std::to_string(steps.size()) + " steps vs " +
                     std::to_string(targets.size()) + " targets");
  }
  const int batch = targets.front().dim(0);
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  Var total;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const LatentVars& g = steps[t];
    require_same_shape(g.mean.value(), targets[t].value(), "gaussian_nll");
    const Var term = add_scalar(g.log_var + square(targets[t] - g.mean) * exp(scale(g.log_var, -1.0)),
                                log_two_pi);
    const Var row = scale(sum_columns(term), 0.5);
    total = total.defined() ? total + row : row;
  }
  if (mask.defined()) total = mul_column(total, mask);
  return scale(sum(total), 1.0 / batch);
}

}  // namespace graph

}  // namespace ptinet
