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

#include "ptinet/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

using json = nlohmann::ordered_json;

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + at_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    at_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    const auto s = bytes_.substr(at_, n);
    at_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (at_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }

  std::string_view bytes_;
  std::size_t at_ = 0;
};

json scaling_json(const BoxScaling& s) {
  return {{"pos_mean", s.pos_mean}, {"pos_std", s.pos_std}, {"vel_mean", s.vel_mean}, {"vel_std", s.vel_std}};
}

BoxScaling scaling_from_json(const json& j) {
  BoxScaling s;
  s.pos_mean = j.at("pos_mean").get<std::array<double, 4>>();
  s.pos_std = j.at("pos_std").get<std::array<double, 4>>();
  s.vel_mean = j.at("vel_mean").get<std::array<double, 4>>();
  s.vel_std = j.at("vel_std").get<std::array<double, 4>>();
  return s;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

double poly_lr(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.max_epoch) {
    throw ConfigError("poly_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(cfg.max_epoch) + "]");
  }
  const double frac = 1.0 - static_cast<double>(epoch) / cfg.max_epoch;
  return cfg.lr_init * std::pow(frac, cfg.lr_power);
}

void round_params_to_float(ParamStore& params) {
  for (const auto& e : params.entries()) {
    for (double& v : Var(e.var).mutable_value().values()) v = static_cast<float>(v);
  }
}

Adam::Adam(ParamStore& params, Options options) : params_(params), options_(options) {
  for (const auto& e : params_.entries()) {
    m_.emplace_back(e.var.shape());
    v_.emplace_back(e.var.shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const auto& entries = params_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Var p = entries[k].var;
    Tensor& value = p.mutable_value();
    const Tensor& grad = p.grad();
    const bool has_grad = !grad.empty();
    if (!has_grad && options_.weight_decay == 0.0) continue;
    double* m = m_[k].data();
    double* v = v_[k].data();
    double* x = value.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = (has_grad ? grad[i] : 0.0) + options_.weight_decay * x[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
      if (options_.float32_params) x[i] = static_cast<float>(x[i]);
    }
  }
}

// ---- data --------------------------------------------------------------------

LoadOptions load_options(const TrainConfig& cfg) {
  LoadOptions o;
  o.m = cfg.m;
  o.n = cfg.horizon_steps();
  o.stride = cfg.window_stride;
  o.target = cfg.encoder.image_dims;
  o.toggles = {cfg.encoder.use_images, cfg.encoder.use_flow};
  return o;
}

std::vector<PedestrianSample> build_samples(const std::vector<PedestrianTrack>& tracks,
                                            const AttributeVocabulary& vocab,
                                            const LoadOptions& options, FrameCache& cache,
                                            const std::filesystem::path& base_dir) {
  std::vector<PedestrianSample> out;
  const WindowSpec spec{options.m, options.n, options.stride};
  const bool global = options.toggles.use_images || options.toggles.use_flow;
  for (const auto& track : tracks) {
    const EncodedTrackContext ctx = encode_attributes(track, vocab);
    for (auto& s : window_track(track, ctx, spec)) {
      if (global) {
        s.global_ctx = load_global_context(track, s.anchor_index, options.m, options.target,
                                           options.toggles, cache, base_dir);
      }
      const auto v = validate_sample(s, options.m, options.n);
      if (!v) {
        throw SchemaError("sample " + s.pedestrian_id + " at frame " + std::to_string(s.anchor_frame) +
                          ": " + v.reason);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

DatasetSplit load_dataset(const TrainConfig& cfg, FrameCache& cache) {
  if (cfg.data_dir.empty()) throw ConfigError("no data directory given");
  const std::filesystem::path dir = cfg.data_dir;
  DatasetSplit split;
  split.vocab = AttributeVocabulary::load(dir / "vocab.json");
  const auto tracks = read_track_file(dir / "tracks.jsonl");
  if (tracks.empty()) throw TrainingError("dataset " + dir.string() + " has no tracks");
  const LoadOptions opts = load_options(cfg);

  std::vector<PedestrianTrack> train_tracks, val_tracks;
  if (!cfg.val_dir.empty()) {
    train_tracks = tracks;
    val_tracks = read_track_file(std::filesystem::path(cfg.val_dir) / "tracks.jsonl");
  } else {
    std::set<std::string> videos;
    for (const auto& t : tracks) videos.insert(t.video_id);
    const std::size_t held = videos.size() > 1
                                 ? static_cast<std::size_t>(std::ceil(cfg.val_fraction * videos.size()))
                                 : 0;
    std::set<std::string> val_videos(std::prev(videos.end(), static_cast<long>(std::min(held, videos.size() - 1))),
                                     videos.end());
    for (const auto& t : tracks) (val_videos.count(t.video_id) ? val_tracks : train_tracks).push_back(t);
  }
  split.train = build_samples(train_tracks, split.vocab, opts, cache, dir);
  split.val = build_samples(val_tracks, split.vocab, opts, cache, cfg.val_dir.empty() ? dir : std::filesystem::path(cfg.val_dir));

  auto cap = [&](std::vector<PedestrianSample>& v, int limit, std::uint64_t salt) {
    if (limit <= 0 || static_cast<int>(v.size()) <= limit) return;
    std::mt19937_64 rng(cfg.seed ^ salt);
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(static_cast<std::size_t>(limit));
  };
  cap(split.train, cfg.max_train_samples, 0x7472u);
  cap(split.val, cfg.max_val_samples, 0x76616cu);
  if (split.train.empty()) throw TrainingError("dataset " + dir.string() + " yields no training windows");
  return split;
}

// ---- checkpoints -------------------------------------------------------------

ModelConfig model_config_for(const TrainConfig& cfg, const AttributeVocabulary& vocab) {
  ModelConfig mc = cfg.model_config();
  mc.encoder.inputs = {std::max(1, vocab.width(AttributeGroup::kPedestrian)),
                       std::max(1, vocab.width(AttributeGroup::kBehavior)),
                       std::max(1, vocab.width(AttributeGroup::kScene))};
  return mc;
}

Checkpoint make_checkpoint(const PTINet& model, const TrainConfig& cfg, int epoch,
                           const std::string& rng_state, const AttributeVocabulary& vocab) {
  Checkpoint c;
  for (const auto& e : model.params().entries()) c.tensors.emplace_back(e.name, e.var.value());
  json config = json::object();
  for (const auto& key : config_keys()) config[key] = get_config_value(cfg, key);
  json meta;
  meta["config"] = config;
  meta["epoch"] = epoch;
  meta["rng_state"] = rng_state;
  meta["vocab"] = json::parse(vocab.to_json());
  meta["scaling"] = scaling_json(model.scaling());
  c.meta_json = meta.dump();
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out = "PTCK";
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put<float>(out, static_cast<float>(v));
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta_json.size()));
  out += ckpt.meta_json;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != "PTCK") throw IoError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.take(r.get<std::uint32_t>()));
    Shape shape(r.get<std::uint32_t>());
    for (int& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
    Tensor t(shape);
    for (double& v : t.values()) v = r.get<float>();
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  c.meta_json = std::string(r.take(r.get<std::uint32_t>()));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

RestoredModel restore_model(const Checkpoint& ckpt) {
  RestoredModel r;
  json meta;
  try {
    meta = json::parse(ckpt.meta_json);
    for (const auto& [key, value] : meta.at("config").items()) {
      set_config_value(r.config, key, value.get<std::string>());
    }
    r.epoch = meta.at("epoch").get<int>();
    r.rng_state = meta.at("rng_state").get<std::string>();
    r.vocab = AttributeVocabulary::from_json(meta.at("vocab").dump());
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint metadata: ") + e.what());
  }
  r.model = std::make_unique<PTINet>(model_config_for(r.config, r.vocab), 0);
  r.model->set_scaling(scaling_from_json(meta.at("scaling")));
  ParamStore& store = r.model->params();
  if (ckpt.tensors.size() != store.entries().size()) {
    throw IoError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                  std::to_string(store.entries().size()));
  }
  for (const auto& [name, t] : ckpt.tensors) {
    if (!store.contains(name)) throw IoError("checkpoint tensor " + name + " is not a model parameter");
    Var p = store.get(name);
    if (p.shape() != t.shape()) {
      throw IoError("checkpoint tensor " + name + " has shape " + shape_string(t.shape()) +
                    ", model expects " + shape_string(p.shape()));
    }
    p.mutable_value() = t;
  }
  return r;
}

// ---- training ----------------------------------------------------------------

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["loss_total"] = num(loss_total);
  j["loss_traj"] = num(loss_traj);
  j["loss_int"] = num(loss_int);
  j["val_ade"] = num(val_ade);
  j["val_fde"] = num(val_fde);
  j["val_f1"] = num(val_f1);
  j["val_acc"] = num(val_acc);
  return j.dump();
}

TrainResult train(const TrainConfig& cfg, std::span<const PedestrianSample> train_set,
                  std::span<const PedestrianSample> val_set, const AttributeVocabulary& vocab,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw TrainingError("empty training set");
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.model = std::make_unique<PTINet>(model_config_for(cfg, vocab), cfg.seed);
  PTINet& model = *result.model;
  model.set_scaling(fit_box_scaling(train_set));
  if (cfg.float32_params) round_params_to_float(model.params());
  Adam adam(model.params(), {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, cfg.weight_decay,
                             cfg.float32_params});
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double best_score = std::numeric_limits<double>::infinity();
  const int n = cfg.horizon_steps();
  for (int epoch = 0; epoch < cfg.max_epoch; ++epoch) {
    const double lr = poly_lr(epoch, cfg);
    std::shuffle(order.begin(), order.end(), rng);
    double sum_total = 0, sum_traj = 0, sum_int = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const PedestrianSample*> ptrs;
      for (std::size_t i = start; i < end; ++i) ptrs.push_back(&train_set[order[i]]);
      const Batch batch = make_batch(ptrs, model.config(), model.scaling(), true);
      const EncoderNoise noise = model.draw_noise(batch.input.batch, rng);
      model.params().zero_grad();
      const ForwardResult out = model.forward(batch, Mode::kTrain, noise);
      const LossTerms terms = model.loss(out, batch, cfg.loss);
      const double total = terms.total.item();
      if (!std::isfinite(total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                            std::to_string(start) + ": traj=" + std::to_string(terms.trajectory.item()) +
                            " int=" + std::to_string(terms.intention.item()));
      }
      backward(terms.total);
      adam.step(lr);
      const double w = static_cast<double>(ptrs.size());
      sum_total += total * w;
      sum_traj += terms.trajectory.item() * w;
      sum_int += terms.intention.item() * w;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    const double count = static_cast<double>(train_set.size());
    rec.loss_total = sum_total / count;
    rec.loss_traj = sum_traj / count;
    rec.loss_int = sum_int / count;
    rec.val_ade = rec.val_fde = rec.val_f1 = rec.val_acc = nan();
    double score = rec.loss_total;
    if (!val_set.empty()) {
      PtinetPredictor predictor(model);
      EvalOptions eo;
      eo.horizons = {cfg.horizon_seconds};
      const MetricReport report = evaluate(predictor, val_set, n, eo);
      rec.val_ade = report.ade_pixels.begin()->second;
      rec.val_fde = report.fde_pixels.begin()->second;
      rec.val_f1 = report.f1;
      rec.val_acc = report.accuracy;
      score = rec.val_ade;
    }
    result.log.push_back(rec);
    if (options.log) *options.log << rec.to_json() << '\n' << std::flush;
    if (options.progress) {
      *options.progress << "epoch " << rec.epoch << "/" << cfg.max_epoch << " loss " << rec.loss_total
                        << " val_ade " << rec.val_ade << " val_f1 " << rec.val_f1 << '\n' << std::flush;
    }

    std::ostringstream state;
    state << rng;
    result.last = make_checkpoint(model, cfg, epoch + 1, state.str(), vocab);
    if (score < best_score || result.best_epoch == 0) {
      best_score = score;
      result.best = result.last;
      result.best_epoch = epoch + 1;
      if (!options.out_dir.empty()) save_checkpoint(options.out_dir / "best.ckpt", result.best);
    }
  }
  if (!options.out_dir.empty()) save_checkpoint(options.out_dir / "last.ckpt", result.last);
  return result;
}

}  // namespace ptinet
