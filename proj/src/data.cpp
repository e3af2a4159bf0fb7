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

#include "ptinet/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ptinet/errors.hpp"
#include "ptinet/kernels.hpp"
#include "ptinet/raster.hpp"

namespace ptinet {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

CategoricalRecord parse_record(const json& j, std::size_t line, const char* what) {
  if (!j.is_object()) throw SchemaError("line " + std::to_string(line) + ": " + what + " must be an object");
  CategoricalRecord rec;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_null()) continue;
    if (!it.value().is_string()) {
      throw SchemaError("line " + std::to_string(line) + ": " + what + "." + it.key() +
                        " must be a string");
    }
    rec[it.key()] = it.value().get<std::string>();
  }
  return rec;
}

ordered_json record_json(const CategoricalRecord& rec) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : rec) j[k] = v;
  return j;
}

PedestrianTrack parse_track(const json& j, std::size_t line) {
  auto fail = [line](const std::string& msg) {
    return SchemaError("line " + std::to_string(line) + ": " + msg);
  };
  if (!j.is_object()) throw fail("track must be a JSON object");
  for (const char* key : {"video_id", "pedestrian_id", "frames", "boxes", "intent", "behavior",
                          "attrs", "image_dims", "frame_uri"}) {
    if (!j.contains(key)) throw fail(std::string("missing key '") + key + "'");
  }
  PedestrianTrack t;
  try {
    t.video_id = j.at("video_id").get<std::string>();
    t.pedestrian_id = j.at("pedestrian_id").get<std::string>();
    t.frame_indices = j.at("frames").get<std::vector<int>>();
    for (const auto& b : j.at("boxes")) {
      auto v = b.get<std::vector<double>>();
      if (v.size() != 4) throw fail("box must have 4 numbers");
      t.boxes.push_back({v[0], v[1], v[2], v[3]});
    }
    t.intention_labels = j.at("intent").get<std::vector<int>>();
    for (const auto& r : j.at("behavior")) t.behavior_raw.push_back(parse_record(r, line, "behavior"));
    if (j.contains("scene") && !j.at("scene").is_null()) {
      std::vector<CategoricalRecord> scene;
      for (const auto& r : j.at("scene")) scene.push_back(parse_record(r, line, "scene"));
      t.scene_raw = std::move(scene);
    }
    t.attrs_raw = parse_record(j.at("attrs"), line, "attrs");
    auto dims = j.at("image_dims").get<std::vector<int>>();
    if (dims.size() != 2) throw fail("image_dims must be [H,W]");
    t.image_dims = {dims[0], dims[1]};
    t.frame_uri_template = j.at("frame_uri").get<std::string>();
  } catch (const json::exception& e) {
    throw fail(e.what());
  }

  const std::size_t len = t.frame_indices.size();
  if (t.boxes.size() != len || t.intention_labels.size() != len || t.behavior_raw.size() != len ||
      (t.scene_raw && t.scene_raw->size() != len)) {
    throw fail("per-frame sequences differ in length (frames " + std::to_string(len) + ", boxes " +
               std::to_string(t.boxes.size()) + ", intent " +
               std::to_string(t.intention_labels.size()) + ", behavior " +
               std::to_string(t.behavior_raw.size()) + ")");
  }
  for (std::size_t i = 1; i < len; ++i) {
    if (t.frame_indices[i] <= t.frame_indices[i - 1]) throw fail("frames not strictly increasing");
  }
  for (int label : t.intention_labels) {
    if (label != 0 && label != 1) throw fail("intent labels must be 0 or 1");
  }
  for (const auto& b : t.boxes) {
    if (!box_is_valid(b)) throw fail("degenerate or non-finite box");
  }
  if (t.image_dims.height <= 0 || t.image_dims.width <= 0) throw fail("image_dims must be positive");
  return t;
}

template <typename T>
void append_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T read_le(std::string_view bytes, std::size_t offset) {
  char raw[sizeof(T)];
  std::memcpy(raw, bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace

// ---- track file ------------------------------------------------------------

std::vector<PedestrianTrack> parse_track_file(std::string_view bytes) {
  std::vector<PedestrianTrack> tracks;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    tracks.push_back(parse_track(j, line_no));
  }
  return tracks;
}

std::string emit_track_file(const std::vector<PedestrianTrack>& tracks) {
  std::string out;
  for (const auto& t : tracks) {
    ordered_json j;
    j["video_id"] = t.video_id;
    j["pedestrian_id"] = t.pedestrian_id;
    j["frames"] = t.frame_indices;
    ordered_json boxes = ordered_json::array();
    for (const auto& b : t.boxes) boxes.push_back({b.x, b.y, b.w, b.h});
    j["boxes"] = std::move(boxes);
    j["intent"] = t.intention_labels;
    ordered_json behavior = ordered_json::array();
    for (const auto& r : t.behavior_raw) behavior.push_back(record_json(r));
    j["behavior"] = std::move(behavior);
    if (t.scene_raw) {
      ordered_json scene = ordered_json::array();
      for (const auto& r : *t.scene_raw) scene.push_back(record_json(r));
      j["scene"] = std::move(scene);
    }
    j["attrs"] = record_json(t.attrs_raw);
    j["image_dims"] = {t.image_dims.height, t.image_dims.width};
    j["frame_uri"] = t.frame_uri_template;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<PedestrianTrack> read_track_file(const std::filesystem::path& path) {
  return parse_track_file(read_file(path));
}

void write_track_file(const std::filesystem::path& path, const std::vector<PedestrianTrack>& tracks) {
  write_file(path, emit_track_file(tracks));
}

// ---- vocabulary ------------------------------------------------------------

const std::vector<std::string>& AttributeVocabulary::group_fields(AttributeGroup group) {
  static const std::vector<std::string> pedestrian{"age", "gender", "group_size"};
  static const std::vector<std::string> behavior{"look", "nod", "gesture", "action"};
  static const std::vector<std::string> scene{"motion_dir", "lanes", "sign",
                                              "crossing", "road_type", "signal"};
  switch (group) {
    case AttributeGroup::kPedestrian:
      return pedestrian;
    case AttributeGroup::kBehavior:
      return behavior;
    case AttributeGroup::kScene:
      return scene;
  }
  return pedestrian;
}

std::optional<AttributeGroup> AttributeVocabulary::group_of(const std::string& field) {
  for (AttributeGroup g : {AttributeGroup::kPedestrian, AttributeGroup::kBehavior, AttributeGroup::kScene}) {
    const auto& names = group_fields(g);
    if (std::find(names.begin(), names.end(), field) != names.end()) return g;
  }
  return std::nullopt;
}

void AttributeVocabulary::add_field(const std::string& field, std::vector<std::string> values) {
  if (!group_of(field)) throw SchemaError("unknown attribute field '" + field + "'");
  for (auto& [name, list] : fields_) {
    if (name == field) {
      list = std::move(values);
      return;
    }
  }
  fields_.emplace_back(field, std::move(values));
}

AttributeVocabulary AttributeVocabulary::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(1, e.what());
  }
  if (!j.is_object()) throw SchemaError("vocabulary must be a JSON object");
  AttributeVocabulary vocab;
  for (auto it = j.begin(); it != j.end(); ++it) {
    try {
      vocab.add_field(it.key(), it.value().get<std::vector<std::string>>());
    } catch (const ordered_json::exception& e) {
      throw SchemaError("vocabulary field '" + it.key() + "': " + e.what());
    }
  }
  return vocab;
}

AttributeVocabulary AttributeVocabulary::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

std::string AttributeVocabulary::to_json() const {
  ordered_json j = ordered_json::object();
  for (const auto& [name, values] : fields_) j[name] = values;
  return j.dump(2);
}

int AttributeVocabulary::width(AttributeGroup group) const {
  int total = 0;
  for (const auto& [name, values] : fields_) {
    if (group_of(name) == group) total += static_cast<int>(values.size());
  }
  return total;
}

std::vector<double> AttributeVocabulary::encode(AttributeGroup group,
                                                const CategoricalRecord& record) const {
  std::vector<double> out(static_cast<std::size_t>(width(group)), 0.0);
  std::size_t offset = 0;
  for (const auto& [name, values] : fields_) {
    if (group_of(name) != group) continue;
    if (auto it = record.find(name); it != record.end()) {
      auto pos = std::find(values.begin(), values.end(), it->second);
      if (pos == values.end()) throw EncodingError(name, it->second);
      out[offset + static_cast<std::size_t>(pos - values.begin())] = 1.0;
    }
    offset += values.size();
  }
  for (const auto& [key, value] : record) {
    if (auto g = group_of(key); !g || *g != group) {
      // A key from another group or an unknown key cannot be encoded here.
      throw EncodingError(key, value);
    }
    const bool declared = std::any_of(fields_.begin(), fields_.end(),
                                      [&](const auto& f) { return f.first == key; });
    if (!declared) throw EncodingError(key, value);
  }
  return out;
}

EncodedTrackContext encode_attributes(const PedestrianTrack& track,
                                      const AttributeVocabulary& vocab) {
  EncodedTrackContext ctx;
  ctx.pedestrian_attrs = vocab.encode(AttributeGroup::kPedestrian, track.attrs_raw);
  ctx.behavior.reserve(track.behavior_raw.size());
  for (const auto& rec : track.behavior_raw) {
    ctx.behavior.push_back(vocab.encode(AttributeGroup::kBehavior, rec));
  }
  if (track.scene_raw) {
    std::vector<std::vector<double>> scene;
    scene.reserve(track.scene_raw->size());
    for (const auto& rec : *track.scene_raw) scene.push_back(vocab.encode(AttributeGroup::kScene, rec));
    ctx.scene = std::move(scene);
  }
  return ctx;
}

// ---- windowing -------------------------------------------------------------

std::size_t expected_window_count(int track_length, int m, int n, int stride) {
  if (track_length < m + n) return 0;
  return static_cast<std::size_t>((track_length - m - n) / stride + 1);
}

std::vector<PedestrianSample> window_track(const PedestrianTrack& track,
                                           const EncodedTrackContext& context,
                                           const WindowSpec& spec) {
  if (spec.m < 2 || spec.n < 1 || spec.stride < 1) {
    throw ConfigError("window spec needs m >= 2, n >= 1, stride >= 1");
  }
  const int len = static_cast<int>(track.length());
  std::vector<PedestrianSample> out;
  for (int t = spec.m - 1; t + spec.n <= len - 1; t += spec.stride) {
    const int first = t - spec.m + 1;
    const int last = t + spec.n;
    if (track.frame_indices[last] - track.frame_indices[first] != last - first) continue;

    PedestrianSample s;
    s.past.positions.assign(track.boxes.begin() + first, track.boxes.begin() + t + 1);
    s.past.velocities = compute_velocities(s.past.positions);
    s.local.pedestrian_attrs = context.pedestrian_attrs;
    s.local.behavior_attrs.assign(context.behavior.begin() + first, context.behavior.begin() + t + 1);
    if (context.scene) {
      s.local.scene_attrs.emplace(context.scene->begin() + first, context.scene->begin() + t + 1);
    }
    s.future_boxes.assign(track.boxes.begin() + t + 1, track.boxes.begin() + last + 1);
    s.future_intentions.assign(track.intention_labels.begin() + t + 1,
                               track.intention_labels.begin() + last + 1);
    s.pedestrian_id = track.pedestrian_id;
    s.video_id = track.video_id;
    s.anchor_frame = track.frame_indices[t];
    s.anchor_index = t;
    s.track_length = len;
    s.image_dims = track.image_dims;
    out.push_back(std::move(s));
  }
  return out;
}

// ---- normalization ---------------------------------------------------------

BoundingBox from_pixels(const BoundingBox& b, ImageDims d, Normalization mode) {
  if (mode == Normalization::kNone) return b;
  return {b.x / d.width, b.y / d.height, b.w / d.width, b.h / d.height};
}

BoundingBox to_pixels(const BoundingBox& b, ImageDims d, Normalization mode) {
  if (mode == Normalization::kNone) return b;
  return {b.x * d.width, b.y * d.height, b.w * d.width, b.h * d.height};
}

PedestrianSample normalize_sample(const PedestrianSample& sample, ImageDims dims, Normalization mode) {
  if (mode == Normalization::kNone) return sample;
  if (dims.height <= 0 || dims.width <= 0) throw ConfigError("normalization needs nonzero image dims");
  if (sample.normalization != Normalization::kNone) {
    throw ConfigError("sample is already normalized");
  }
  PedestrianSample out = sample;
  for (auto& b : out.past.positions) b = from_pixels(b, dims, mode);
  for (auto& b : out.future_boxes) b = from_pixels(b, dims, mode);
  for (auto& v : out.past.velocities) {
    v = {v.dx / dims.width, v.dy / dims.height, v.dw / dims.width, v.dh / dims.height};
  }
  out.image_dims = dims;
  out.normalization = mode;
  return out;
}

PedestrianSample denormalize_sample(const PedestrianSample& sample) {
  if (sample.normalization == Normalization::kNone) return sample;
  const ImageDims d = sample.image_dims;
  PedestrianSample out = sample;
  for (auto& b : out.past.positions) b = to_pixels(b, d, sample.normalization);
  for (auto& b : out.future_boxes) b = to_pixels(b, d, sample.normalization);
  for (auto& v : out.past.velocities) {
    v = {v.dx * d.width, v.dy * d.height, v.dw * d.width, v.dh * d.height};
  }
  out.normalization = Normalization::kNone;
  return out;
}

// ---- flow files ------------------------------------------------------------

std::string encode_flow(const Tensor& flow) {
  if (flow.rank() != 3 || flow.dim(0) != 2) {
    throw ShapeError("flow must be [2,H,W], got " + shape_string(flow.shape()));
  }
  std::string out = "PTFL";
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(flow.dim(1)));
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(flow.dim(2)));
  out.reserve(out.size() + flow.size() * 4);
  for (double v : flow.values()) append_le<float>(out, static_cast<float>(v));
  return out;
}

Tensor decode_flow(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "PTFL") throw IoError("not a PTFL flow file");
  const auto h = read_le<std::uint32_t>(bytes, 4);
  const auto w = read_le<std::uint32_t>(bytes, 8);
  const std::size_t count = static_cast<std::size_t>(h) * w * 2;
  if (bytes.size() != 12 + count * 4) throw IoError("PTFL payload size does not match header");
  Tensor out(Shape{2, static_cast<int>(h), static_cast<int>(w)});
  for (std::size_t i = 0; i < count; ++i) out[i] = read_le<float>(bytes, 12 + i * 4);
  return out;
}

void write_flow_file(const std::filesystem::path& path, const Tensor& flow) {
  write_file(path, encode_flow(flow));
}

Tensor read_flow_file(const std::filesystem::path& path) {
  try {
    return decode_flow(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string format_frame_uri(const std::string& pattern, int frame) {
  std::string out;
  bool used = false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] != '%') {
      out += pattern[i];
      continue;
    }
    if (i + 1 < pattern.size() && pattern[i + 1] == '%') {
      out += '%';
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    bool zero = false;
    if (j < pattern.size() && pattern[j] == '0') {
      zero = true;
      ++j;
    }
    int width = 0;
    while (j < pattern.size() && std::isdigit(static_cast<unsigned char>(pattern[j]))) {
      width = width * 10 + (pattern[j] - '0');
      ++j;
    }
    if (j >= pattern.size() || (pattern[j] != 'd' && pattern[j] != 'i') || used) {
      throw SchemaError("frame_uri needs exactly one %d conversion: " + pattern);
    }
    std::string digits = std::to_string(frame);
    if (static_cast<int>(digits.size()) < width) {
      digits.insert(0, static_cast<std::size_t>(width) - digits.size(), zero ? '0' : ' ');
    }
    out += digits;
    used = true;
    i = j;
  }
  if (!used) throw SchemaError("frame_uri needs exactly one %d conversion: " + pattern);
  return out;
}

std::string flow_uri_pattern(const std::string& frame_pattern) {
  const auto slash = frame_pattern.find_last_of('/');
  const auto dot = frame_pattern.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return frame_pattern + ".ptfl";
  }
  return frame_pattern.substr(0, dot) + ".ptfl";
}

// ---- frame loading ---------------------------------------------------------

Tensor resize_image(const Tensor& image, ImageDims target) {
  if (image.dim(1) == target.height && image.dim(2) == target.width) return image;
  Tensor out(Shape{image.dim(0), target.height, target.width});
  kernels::resize_bilinear(image.dim(0), image.dim(1), image.dim(2), image.data(), target.height,
                           target.width, out.data());
  return out;
}

Tensor resize_flow(const Tensor& flow, ImageDims target) {
  Tensor out = resize_image(flow, target);
  const double sx = static_cast<double>(target.width) / flow.dim(2);
  const double sy = static_cast<double>(target.height) / flow.dim(1);
  const std::size_t plane = static_cast<std::size_t>(target.height) * target.width;
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] *= sx;
    out[plane + i] *= sy;
  }
  return out;
}

std::string FrameCache::key(const std::filesystem::path& path, ImageDims target) const {
  return path.string() + "@" + std::to_string(target.height) + "x" + std::to_string(target.width);
}

FramePtr FrameCache::image(const std::filesystem::path& path, ImageDims target) {
  const std::string k = key(path, target);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(k); it != entries_.end()) return it->second;
  }
  if (!std::filesystem::exists(path)) throw IoError("missing frame " + path.string());
  auto frame = std::make_shared<const Tensor>(resize_image(raster::read_png(path), target));
  std::lock_guard lock(mutex_);
  return entries_.emplace(k, frame).first->second;
}

FramePtr FrameCache::flow(const std::filesystem::path& path, ImageDims target) {
  const std::string k = key(path, target);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(k); it != entries_.end()) return it->second;
  }
  if (!std::filesystem::exists(path)) throw IoError("missing flow " + path.string());
  auto flow = std::make_shared<const Tensor>(resize_flow(read_flow_file(path), target));
  std::lock_guard lock(mutex_);
  return entries_.emplace(k, flow).first->second;
}

FramePtr FrameCache::zeros(int channels, ImageDims target) {
  const std::string k = "<zeros" + std::to_string(channels) + ">@" +
                        std::to_string(target.height) + "x" + std::to_string(target.width);
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(k); it != entries_.end()) return it->second;
  auto z = std::make_shared<const Tensor>(Shape{channels, target.height, target.width});
  return entries_.emplace(k, z).first->second;
}

std::size_t FrameCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

GlobalContext load_global_context(const PedestrianTrack& track, int anchor_index, int m,
                                  ImageDims target, GlobalToggles toggles, FrameCache& cache,
                                  const std::filesystem::path& base_dir) {
  const int first = anchor_index - m + 1;
  if (first < 0 || anchor_index >= static_cast<int>(track.length())) {
    throw ShapeError("window [" + std::to_string(first) + ", " + std::to_string(anchor_index) +
                     "] outside track of length " + std::to_string(track.length()));
  }
  GlobalContext g;
  g.images.reserve(static_cast<std::size_t>(m));
  g.flows.reserve(static_cast<std::size_t>(m - 1));
  const std::string flow_pattern = flow_uri_pattern(track.frame_uri_template);
  for (int k = first; k <= anchor_index; ++k) {
    const int frame = track.frame_indices[k];
    if (toggles.use_images) {
      g.images.push_back(cache.image(base_dir / format_frame_uri(track.frame_uri_template, frame), target));
    } else {
      g.images.push_back(cache.zeros(3, target));
    }
    if (k == anchor_index) break;
    if (toggles.use_flow) {
      g.flows.push_back(cache.flow(base_dir / format_frame_uri(flow_pattern, frame), target));
    } else {
      g.flows.push_back(cache.zeros(2, target));
    }
  }
  return g;
}

}  // namespace ptinet
