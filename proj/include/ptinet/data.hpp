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

// Canonical track interchange format, attribute encoding, windowing,
// normalization and frame/flow loading.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptinet/domain.hpp"

namespace ptinet {

using CategoricalRecord = std::map<std::string, std::string>;

struct PedestrianTrack {
  std::string video_id;
  std::string pedestrian_id;
  std::vector<int> frame_indices;
  std::vector<BoundingBox> boxes;
  std::vector<int> intention_labels;
  std::vector<CategoricalRecord> behavior_raw;
  std::optional<std::vector<CategoricalRecord>> scene_raw;
  CategoricalRecord attrs_raw;
  ImageDims image_dims;
  std::string frame_uri_template;

  std::size_t length() const { return boxes.size(); }
  bool operator==(const PedestrianTrack&) const = default;
};

// One JSON object per line; blank lines are skipped. Throws ParseError for
// malformed lines and SchemaError for invariant violations.
std::vector<PedestrianTrack> parse_track_file(std::string_view bytes);
std::string emit_track_file(const std::vector<PedestrianTrack>& tracks);
std::vector<PedestrianTrack> read_track_file(const std::filesystem::path& path);
void write_track_file(const std::filesystem::path& path, const std::vector<PedestrianTrack>& tracks);

enum class AttributeGroup { kPedestrian, kBehavior, kScene };

// Field -> ordered value list. One-hot per field, concatenated in the order
// fields were declared, separately for each group.
class AttributeVocabulary {
 public:
  static const std::vector<std::string>& group_fields(AttributeGroup group);
  static std::optional<AttributeGroup> group_of(const std::string& field);

  void add_field(const std::string& field, std::vector<std::string> values);
  static AttributeVocabulary from_json(std::string_view text);
  static AttributeVocabulary load(const std::filesystem::path& path);
  std::string to_json() const;

  int width(AttributeGroup group) const;
  // Missing fields in the record leave their segment zero.
  std::vector<double> encode(AttributeGroup group, const CategoricalRecord& record) const;

  const std::vector<std::pair<std::string, std::vector<std::string>>>& fields() const {
    return fields_;
  }
  bool operator==(const AttributeVocabulary&) const = default;

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> fields_;
};

// Per-frame encodings for a whole track.
struct EncodedTrackContext {
  std::vector<double> pedestrian_attrs;
  std::vector<std::vector<double>> behavior;
  std::optional<std::vector<std::vector<double>>> scene;
};

EncodedTrackContext encode_attributes(const PedestrianTrack& track,
                                      const AttributeVocabulary& vocab);

struct WindowSpec {
  int m = 16;
  int n = 15;
  int stride = 1;
};

// Closed form for gap-free tracks.
std::size_t expected_window_count(int track_length, int m, int n, int stride);

// Windows containing a gap in frame_indices are dropped. The returned samples
// carry no global context; see load_global_context.
std::vector<PedestrianSample> window_track(const PedestrianTrack& track,
                                           const EncodedTrackContext& context,
                                           const WindowSpec& spec);

PedestrianSample normalize_sample(const PedestrianSample& sample, ImageDims dims, Normalization mode);
PedestrianSample denormalize_sample(const PedestrianSample& sample);
BoundingBox to_pixels(const BoundingBox& box, ImageDims dims, Normalization mode);
BoundingBox from_pixels(const BoundingBox& box, ImageDims dims, Normalization mode);

// ---- frames and flow -------------------------------------------------------

// "PTFL", uint32 H, uint32 W, H*W float32 u plane, H*W float32 v plane; all
// little-endian.
std::string encode_flow(const Tensor& flow);
Tensor decode_flow(std::string_view bytes);
void write_flow_file(const std::filesystem::path& path, const Tensor& flow);
Tensor read_flow_file(const std::filesystem::path& path);

// Expands a printf-style pattern with a single integer conversion such as
// "frames/v0001/%06d.png".
std::string format_frame_uri(const std::string& pattern, int frame);
// Flow between frame f and f+1 lives next to frame f with extension ".ptfl".
std::string flow_uri_pattern(const std::string& frame_pattern);

struct GlobalToggles {
  bool use_images = true;
  bool use_flow = true;
};

// Decoded, resized frames keyed by path and target size. Safe to share
// between threads.
class FrameCache {
 public:
  FramePtr image(const std::filesystem::path& path, ImageDims target);
  FramePtr flow(const std::filesystem::path& path, ImageDims target);
  FramePtr zeros(int channels, ImageDims target);
  std::size_t size() const;

 private:
  std::string key(const std::filesystem::path& path, ImageDims target) const;

  mutable std::mutex mutex_;
  std::unordered_map<std::string, FramePtr> entries_;
};

// Resizes an RGB frame [3,h,w] to target with bilinear sampling.
Tensor resize_image(const Tensor& image, ImageDims target);
// Resizes a flow field [2,h,w] and rescales u by the width ratio and v by the
// height ratio.
Tensor resize_flow(const Tensor& flow, ImageDims target);

GlobalContext load_global_context(const PedestrianTrack& track, int anchor_index, int m,
                                  ImageDims target, GlobalToggles toggles, FrameCache& cache,
                                  const std::filesystem::path& base_dir);

}  // namespace ptinet
