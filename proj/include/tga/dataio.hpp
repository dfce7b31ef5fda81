#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tga/error.hpp"

namespace tga {

enum class Split { train, val, test };

std::string split_name(Split s);
Split parse_split(const std::string& s, const std::string& context);

struct Moment {
  uint32_t start = 0;  // inclusive, unit coordinates
  uint32_t end = 0;    // exclusive

  bool operator==(const Moment&) const = default;
};

struct VideoFeatures {
  std::string video_id;
  uint32_t num_units = 0;
  uint32_t feature_dim = 0;
  uint32_t unit_duration_frames = 1;
  std::vector<float> data;  // row-major [num_units][feature_dim]

  const float* unit(size_t k) const { return data.data() + k * feature_dim; }
  float* unit(size_t k) { return data.data() + k * feature_dim; }
};

struct SentenceQuery {
  std::string query_id;
  std::string video_id;
  std::vector<uint32_t> tokens;
  std::optional<Moment> gt_moment;
  Split split = Split::train;
};

// A fully loaded and validated dataset: manifest plus every feature file.
struct Dataset {
  uint32_t feature_dim = 0;
  std::vector<std::string> vocab;  // position = token id
  std::vector<VideoFeatures> videos;
  std::unordered_map<std::string, size_t> video_index;  // video_id -> index
  std::vector<SentenceQuery> queries;

  const VideoFeatures& video_of(const std::string& video_id) const;
  std::vector<size_t> query_indices(Split s) const;
};

// Binary feature file: magic "TGAF", version, num_units, feature_dim, then
// row-major 32-bit floats. Everything little-endian.
VideoFeatures read_features(const std::string& path);
void write_features(const VideoFeatures& v, const std::string& path);

// Parses manifest.json, loads the vocabulary and every referenced feature
// file, and cross-checks declared shapes against file headers.
Dataset load_manifest(const std::string& manifest_path);

}  // namespace tga
