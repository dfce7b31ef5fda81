#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tga/dataio.hpp"
#include "tga/model.hpp"

namespace tga {

struct TrainConfig {
  double lr = 0.001;
  uint32_t lr_decay_every = 15;   // epochs
  double lr_decay_factor = 10.0;  // divide lr by this at each boundary
  double margin = 0.1;
  uint32_t batch_size = 128;
  uint32_t max_epochs = 0;
  uint64_t seed = 0;
  uint32_t word_dim = 300;
  uint32_t text_dim = 1024;
  uint32_t joint_dim = 1024;
  double dropout = 0.5;
  bool strict_negatives = false;
  bool bidirectional_val = false;

  void validate() const;  // throws DataError on out-of-range values
};

struct EpochRecord {
  uint32_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double val_recall_sum = 0.0;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  int32_t best_epoch = -1;
  double best_recall_sum = 0.0;
  double wall_seconds = 0.0;  // reported on stderr, not part of runlog.json
};

struct TrainResult {
  Model<float> best;
  Model<float> last;
  RunLog log;
};

// Fraction of queries whose own video lands in the top K of the ranking.
// Ranking is by joint-space cosine between the projected sentence feature
// and the video pooled under that sentence's attention; ties resolve by
// ascending video id. Returns R@1 + R@5 + R@10 (so at most 3.0), plus the
// reverse direction when bidirectional is set (at most 6.0).
double validate_retrieval(const Model<float>& m, const Dataset& ds, bool bidirectional);

// Epoch loop: seeded shuffle, fixed-size batches (trailing partial batch
// dropped), Adam updates, stepwise lr decay, and best-checkpoint selection
// by the highest validation recall sum with ties going to the earlier epoch.
// on_epoch, when set, observes each epoch record as it is produced.
TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_runlog(const RunLog& log, const std::string& path);

}  // namespace tga
