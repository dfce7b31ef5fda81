#pragma once

#include <cstdint>
#include <string>

#include "tga/dataio.hpp"

namespace tga {

struct SyntheticConfig {
  uint32_t num_train_videos = 0;
  uint32_t num_val_videos = 0;
  uint32_t num_test_videos = 0;
  uint32_t units_per_video = 0;
  uint32_t feature_dim = 0;
  uint32_t vocab_size = 0;
  uint32_t sentence_length = 0;
  uint32_t moments_per_video = 0;
  uint32_t moment_length_min = 0;
  uint32_t moment_length_max = 0;
  double signal_to_noise = 1.0;
  uint64_t seed = 0;

  void validate() const;  // throws DataError on an infeasible setup
};

SyntheticConfig load_synth_config(const std::string& path);

// Writes manifest.json, vocab.json and features/ under out_dir and returns
// the generated dataset. Entirely determined by the config: each planted
// moment carries one query whose tokens map through a fixed random concept
// table to the signal direction planted in the moment's units.
Dataset generate_synthetic(const SyntheticConfig& cfg, const std::string& out_dir);

}  // namespace tga
