#include "tga/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "tga/attention.hpp"
#include "tga/format.hpp"

namespace tga {

using nlohmann::json;

double iou(Moment a, Moment b) {
  if (a.start >= a.end || b.start >= b.end)
    throw DataError("iou: empty interval");
  const int64_t inter = std::min<int64_t>(a.end, b.end) - std::max<int64_t>(a.start, b.start);
  if (inter <= 0) return 0.0;
  const int64_t uni = (a.end - a.start) + (b.end - b.start) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Moment> sliding_window_candidates(uint32_t num_units,
                                              uint32_t unit_duration_frames,
                                              const std::vector<uint32_t>& window_frames,
                                              double stride_fraction) {
  if (window_frames.empty())
    throw DataError("sliding_window_candidates: no window lengths given");
  if (!(stride_fraction > 0.0) || stride_fraction > 1.0)
    throw DataError("sliding_window_candidates: stride_fraction must lie in (0, 1]");
  if (num_units == 0 || unit_duration_frames == 0)
    throw DataError("sliding_window_candidates: degenerate video shape");

  std::set<std::pair<uint32_t, uint32_t>> seen;
  for (uint32_t wf : window_frames) {
    if (wf == 0 || wf % unit_duration_frames != 0)
      throw DataError("sliding_window_candidates: window of " + std::to_string(wf) +
                      " frames is not a positive multiple of the " +
                      std::to_string(unit_duration_frames) + "-frame unit");
    const uint32_t len = wf / unit_duration_frames;
    if (len >= num_units) {
      seen.emplace(0, num_units);  // whole video for windows it cannot fit
      continue;
    }
    const uint32_t stride = std::max<uint32_t>(
        1, static_cast<uint32_t>(std::llround(stride_fraction * len)));
    for (uint32_t start = 0; start + len <= num_units; start += stride)
      seen.emplace(start, start + len);
    seen.emplace(num_units - len, num_units);  // right-aligned tail
  }
  std::vector<Moment> out;
  for (const auto& [s, e] : seen) out.push_back(Moment{s, e});
  return out;
}

std::vector<Moment> didemo_candidates(uint32_t num_segments) {
  if (num_segments == 0) throw DataError("didemo_candidates: no segments");
  std::vector<Moment> out;
  for (uint32_t i = 0; i < num_segments; ++i)
    for (uint32_t j = i + 1; j <= num_segments; ++j) out.push_back(Moment{i, j});
  return out;
}

std::vector<ScoredCandidate> score_candidates(const std::vector<double>& weights,
                                              const std::vector<Moment>& candidates,
                                              bool sum_score) {
  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  for (const Moment& c : candidates) {
    if (c.start >= c.end || c.end > weights.size())
      throw DataError("score_candidates: candidate [" + std::to_string(c.start) + "," +
                      std::to_string(c.end) + ") exceeds the " +
                      std::to_string(weights.size()) + "-unit trace");
    double s = 0.0;
    for (uint32_t u = c.start; u < c.end; ++u) s += weights[u];
    if (!sum_score) s /= static_cast<double>(c.end - c.start);
    out.push_back(ScoredCandidate{c.start, c.end, s});
  }
  std::sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return (a.end - a.start) < (b.end - b.start);
  });
  return out;
}

EvalReport aggregate_metrics(const std::vector<RankedQuery>& queries,
                             const std::vector<double>& iou_thresholds,
                             const std::vector<uint32_t>& ks) {
  if (iou_thresholds.empty() || ks.empty())
    throw DataError("aggregate_metrics: thresholds and ks must be non-empty");
  EvalReport report;
  report.iou_thresholds = iou_thresholds;
  report.ks = ks;
  report.recall.assign(iou_thresholds.size(), std::vector<double>(ks.size(), 0.0));
  const uint32_t max_k = *std::max_element(ks.begin(), ks.end());

  double iou_total = 0.0;
  for (const RankedQuery& q : queries) {
    if (q.ranked.empty()) throw DataError("aggregate_metrics: query \"" + q.query_id +
                                          "\" has no candidates");
    QueryEval qe;
    qe.query_id = q.query_id;
    const size_t keep = std::min<size_t>(max_k, q.ranked.size());
    for (size_t r = 0; r < keep; ++r) {
      qe.top.push_back(q.ranked[r]);
      qe.top_iou.push_back(iou(Moment{q.ranked[r].start, q.ranked[r].end}, q.gt));
    }
    iou_total += qe.top_iou[0];
    for (size_t ti = 0; ti < iou_thresholds.size(); ++ti)
      for (size_t ki = 0; ki < ks.size(); ++ki) {
        const size_t k = std::min<size_t>(ks[ki], qe.top_iou.size());
        for (size_t r = 0; r < k; ++r)
          if (qe.top_iou[r] >= iou_thresholds[ti]) {
            report.recall[ti][ki] += 1.0;
            break;
          }
      }
    report.per_query.push_back(std::move(qe));
  }
  if (!queries.empty()) {
    for (auto& row : report.recall)
      for (double& cell : row) cell = 100.0 * cell / static_cast<double>(queries.size());
    report.miou = iou_total / static_cast<double>(queries.size());
  }
  return report;
}

EvalReport evaluate(const Model<float>& m, const Dataset& ds, Split split,
                    const EvalConfig& cfg) {
  std::vector<RankedQuery> ranked;
  for (size_t qi : ds.query_indices(split)) {
    const SentenceQuery& q = ds.queries[qi];
    if (!q.gt_moment)
      throw DataError("query \"" + q.query_id + "\" has no ground-truth moment");
    const VideoFeatures& video = ds.video_of(q.video_id);

    const std::vector<float> w = embed_sentence(m, q.tokens);
    TgaCache<float> cache;
    text_guided_feature(m, video, w, /*train_mode=*/false, 0.0, nullptr, &cache);
    std::vector<double> weights(cache.attn.begin(), cache.attn.end());

    const std::vector<Moment> candidates =
        cfg.protocol == Protocol::didemo
            ? didemo_candidates(video.num_units)
            : sliding_window_candidates(video.num_units, video.unit_duration_frames,
                                        cfg.window_frames, cfg.stride_fraction);
    RankedQuery rq;
    rq.query_id = q.query_id;
    rq.ranked = score_candidates(weights, candidates, cfg.sum_score);
    rq.gt = *q.gt_moment;
    ranked.push_back(std::move(rq));
  }
  return aggregate_metrics(ranked, cfg.iou_thresholds, cfg.ks);
}

void write_report_json(const EvalReport& r, const std::string& path) {
  json j;
  j["iou_thresholds"] = r.iou_thresholds;
  j["ks"] = r.ks;
  j["recall"] = r.recall;
  j["miou"] = r.miou;
  j["per_query"] = json::array();
  for (const QueryEval& q : r.per_query) {
    json top = json::array();
    for (size_t i = 0; i < q.top.size(); ++i)
      top.push_back({{"start", q.top[i].start},
                     {"end", q.top[i].end},
                     {"score", q.top[i].score},
                     {"iou", q.top_iou[i]}});
    j["per_query"].push_back({{"query_id", q.query_id}, {"top", std::move(top)}});
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(path + ": cannot write report");
  os << j.dump(2) << "\n";
}

void write_report_csv(const EvalReport& r, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(path + ": cannot write report");
  os << "query_id,rank,start,end,score,iou\n";
  for (const QueryEval& q : r.per_query)
    for (size_t i = 0; i < q.top.size(); ++i)
      os << q.query_id << "," << (i + 1) << "," << q.top[i].start << "," << q.top[i].end
         << "," << fmt_double(q.top[i].score) << "," << fmt_double(q.top_iou[i]) << "\n";
}

}  // namespace tga
