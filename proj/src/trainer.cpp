#include "tga/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tga/adam.hpp"
#include "tga/attention.hpp"
#include "tga/loss.hpp"

namespace tga {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw DataError("train config: lr must be positive");
  if (lr_decay_every == 0) throw DataError("train config: lr_decay_every must be positive");
  if (!(lr_decay_factor > 0.0)) throw DataError("train config: lr_decay_factor must be positive");
  if (margin < 0.0 || margin > 2.0)
    throw DataError("train config: margin must lie in [0, 2]");
  if (batch_size < 2) throw DataError("train config: batch_size must be at least 2");
  if (word_dim == 0 || text_dim == 0 || joint_dim == 0)
    throw DataError("train config: model dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw DataError("train config: dropout must lie in [0, 1)");
}

namespace {

struct RetrievalPool {
  std::vector<size_t> query_idx;       // into ds.queries
  std::vector<std::string> video_ids;  // ascending
};

RetrievalPool val_pool(const Dataset& ds) {
  RetrievalPool pool;
  pool.query_idx = ds.query_indices(Split::val);
  for (size_t qi : pool.query_idx) pool.video_ids.push_back(ds.queries[qi].video_id);
  std::sort(pool.video_ids.begin(), pool.video_ids.end());
  pool.video_ids.erase(std::unique(pool.video_ids.begin(), pool.video_ids.end()),
                       pool.video_ids.end());
  return pool;
}

}  // namespace

double validate_retrieval(const Model<float>& m, const Dataset& ds, bool bidirectional) {
  const RetrievalPool pool = val_pool(ds);
  const size_t nq = pool.query_idx.size();
  const size_t nv = pool.video_ids.size();
  if (nq == 0) throw DataError("validation split is empty");

  // sim[q][v]: joint-space cosine of query q against video v pooled under q
  std::vector<std::vector<float>> sim(nq, std::vector<float>(nv));
  for (size_t q = 0; q < nq; ++q) {
    const SentenceQuery& query = ds.queries[pool.query_idx[q]];
    const std::vector<float> w = embed_sentence(m, query.tokens);
    const std::vector<float> tp = joint_project(m.Wt, w);
    for (size_t v = 0; v < nv; ++v) {
      const VideoFeatures& video = ds.video_of(pool.video_ids[v]);
      const std::vector<float> f =
          text_guided_feature(m, video, w, /*train_mode=*/false, 0.0, nullptr);
      const std::vector<float> vp = joint_project(m.Wv, f);
      sim[q][v] = joint_similarity(vp, tp);
    }
  }

  size_t h1 = 0, h5 = 0, h10 = 0;
  for (size_t q = 0; q < nq; ++q) {
    const std::string& own = ds.queries[pool.query_idx[q]].video_id;
    std::vector<size_t> order(nv);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (sim[q][a] != sim[q][b]) return sim[q][a] > sim[q][b];
      return pool.video_ids[a] < pool.video_ids[b];
    });
    for (size_t rank = 0; rank < nv; ++rank) {
      if (pool.video_ids[order[rank]] == own) {
        if (rank < 1) ++h1;
        if (rank < 5) ++h5;
        if (rank < 10) ++h10;
        break;
      }
    }
  }
  double sum = static_cast<double>(h1 + h5 + h10) / static_cast<double>(nq);

  if (bidirectional) {
    size_t g1 = 0, g5 = 0, g10 = 0;
    for (size_t v = 0; v < nv; ++v) {
      std::vector<size_t> order(nq);
      std::iota(order.begin(), order.end(), size_t{0});
      std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (sim[a][v] != sim[b][v]) return sim[a][v] > sim[b][v];
        return ds.queries[pool.query_idx[a]].query_id < ds.queries[pool.query_idx[b]].query_id;
      });
      for (size_t rank = 0; rank < std::min<size_t>(10, nq); ++rank) {
        if (ds.queries[pool.query_idx[order[rank]]].video_id == pool.video_ids[v]) {
          if (rank < 1) ++g1;
          if (rank < 5) ++g5;
          ++g10;
          break;
        }
      }
    }
    sum += static_cast<double>(g1 + g5 + g10) / static_cast<double>(nv);
  }
  return sum;
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();

  std::vector<BatchPair> pairs;
  for (const SentenceQuery& q : ds.queries) {
    if (q.split != Split::train) continue;
    pairs.push_back(BatchPair{q.query_id, &ds.video_of(q.video_id), q.tokens});
  }
  if (pairs.empty()) throw DataError("train split is empty");

  ModelDims dims;
  dims.vocab_size = static_cast<uint32_t>(ds.vocab.size());
  dims.word_dim = cfg.word_dim;
  dims.text_dim = cfg.text_dim;
  dims.feature_dim = ds.feature_dim;
  dims.joint_dim = cfg.joint_dim;

  Rng rng(cfg.seed);
  Model<float> model = init_model<float>(dims, rng);
  Adam<float> adam(dims);
  Model<float> grads(dims);

  TrainResult result;
  result.log.best_epoch = -1;
  double best_sum = -1.0;
  result.best = model;

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (uint32_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr / std::pow(cfg.lr_decay_factor,
                                        static_cast<double>(epoch / cfg.lr_decay_every));
    rng.shuffle(order);
    const size_t num_batches = pairs.size() / cfg.batch_size;
    double loss_sum = 0.0;
    for (size_t b = 0; b < num_batches; ++b) {
      std::vector<BatchPair> batch;
      batch.reserve(cfg.batch_size);
      for (size_t i = 0; i < cfg.batch_size; ++i)
        batch.push_back(pairs[order[b * cfg.batch_size + i]]);
      grads.zero();
      const auto fwd = batch_forward<float>(model, batch, static_cast<float>(cfg.margin),
                                            cfg.dropout, &rng, cfg.strict_negatives, &grads);
      if (!std::isfinite(fwd.loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(b));
      adam.apply(model, grads, lr);
      loss_sum += static_cast<double>(fwd.loss);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.mean_loss = num_batches ? loss_sum / static_cast<double>(num_batches) : 0.0;
    rec.val_recall_sum = validate_retrieval(model, ds, cfg.bidirectional_val);
    result.log.epochs.push_back(rec);
    if (rec.val_recall_sum > best_sum) {
      best_sum = rec.val_recall_sum;
      result.log.best_epoch = static_cast<int32_t>(epoch);
      result.log.best_recall_sum = rec.val_recall_sum;
      result.best = model;
    }
    if (on_epoch) on_epoch(rec);
  }

  result.last = std::move(model);
  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_runlog(const RunLog& log, const std::string& path) {
  json j;
  j["epochs"] = json::array();
  for (const EpochRecord& r : log.epochs)
    j["epochs"].push_back({{"epoch", r.epoch},
                           {"lr", r.lr},
                           {"mean_loss", r.mean_loss},
                           {"val_recall_sum", r.val_recall_sum}});
  j["best_epoch"] = log.best_epoch;
  j["best_recall_sum"] = log.best_recall_sum;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(path + ": cannot write run log");
  os << j.dump(2) << "\n";
}

}  // namespace tga
