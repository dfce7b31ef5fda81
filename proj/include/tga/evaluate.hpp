#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tga/dataio.hpp"
#include "tga/model.hpp"

namespace tga {

double iou(Moment a, Moment b);

// Candidate enumeration. Sliding windows are given in frames and converted
// to units via unit_duration_frames; each length is tiled at stride
// max(1, round(stride_fraction * length)) with a right-aligned tail window,
// videos shorter than the window collapse to the whole-video interval, and
// the union over lengths is deduplicated and sorted by (start, end).
std::vector<Moment> sliding_window_candidates(uint32_t num_units,
                                              uint32_t unit_duration_frames,
                                              const std::vector<uint32_t>& window_frames,
                                              double stride_fraction);

// Every contiguous span of segments: n(n+1)/2 candidates.
std::vector<Moment> didemo_candidates(uint32_t num_segments);

struct ScoredCandidate {
  uint32_t start = 0;
  uint32_t end = 0;
  double score = 0.0;
};

// Scores each candidate by the mean attention weight over its units (sum
// with sum_score) and ranks descending; ties go to the earlier start, then
// the shorter candidate.
std::vector<ScoredCandidate> score_candidates(const std::vector<double>& weights,
                                              const std::vector<Moment>& candidates,
                                              bool sum_score = false);

enum class Protocol { sliding_window, didemo };

struct EvalConfig {
  Protocol protocol = Protocol::sliding_window;
  std::vector<uint32_t> window_frames = {128, 256};
  double stride_fraction = 0.5;
  std::vector<double> iou_thresholds = {0.3, 0.5, 0.7};
  std::vector<uint32_t> ks = {1, 5, 10};
  bool sum_score = false;
};

struct QueryEval {
  std::string query_id;
  std::vector<ScoredCandidate> top;  // best max(ks) candidates
  std::vector<double> top_iou;       // IoU of each against ground truth
};

struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<uint32_t> ks;
  std::vector<std::vector<double>> recall;  // [threshold][k], percent
  double miou = 0.0;                        // mean top-1 IoU, in [0, 1]
  std::vector<QueryEval> per_query;
};

// One fully ranked query, ready for metric aggregation.
struct RankedQuery {
  std::string query_id;
  std::vector<ScoredCandidate> ranked;
  Moment gt;
};

EvalReport aggregate_metrics(const std::vector<RankedQuery>& queries,
                             const std::vector<double>& iou_thresholds,
                             const std::vector<uint32_t>& ks);

// Full localization pass over one split: attention trace per query,
// candidates per protocol, ranking, then R@K / mIoU aggregation. Every
// query in the split must carry a ground-truth moment.
EvalReport evaluate(const Model<float>& m, const Dataset& ds, Split split,
                    const EvalConfig& cfg);

void write_report_json(const EvalReport& r, const std::string& path);
void write_report_csv(const EvalReport& r, const std::string& path);

}  // namespace tga
