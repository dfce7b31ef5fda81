#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tga/attention.hpp"
#include "tga/dataio.hpp"
#include "tga/error.hpp"
#include "tga/kernels.hpp"
#include "tga/model.hpp"

namespace tga {

// What the trainer hands to the loss: a positive (video, sentence) pair.
// Deliberately has no ground-truth moment field.
struct BatchPair {
  std::string query_id;
  const VideoFeatures* video = nullptr;
  std::vector<uint32_t> tokens;
};

template <class S>
struct JointPoints {
  std::vector<std::string> query_id;
  std::vector<std::string> video_id;
  std::vector<std::vector<S>> vp;  // projected pooled video features
  std::vector<std::vector<S>> tp;  // projected sentence features
  size_t size() const { return vp.size(); }
};

template <class S>
inline S joint_similarity(const std::vector<S>& vp, const std::vector<S>& tp) {
  return cosine(vp, tp);
}

// Bidirectional hinge ranking loss over in-batch negatives:
//
//   L = sum_i [ sum_{j in N(i)} max(0, margin - S(i,i) + S(i->j))      (text negatives)
//             + sum_{j in N(i)} max(0, margin - S(i,i) + S(j->i)) ]    (video negatives)
//
// where S(i,j) = cosine(vp_i, tp_j). By default N(i) excludes entries that
// share the anchor's video (a video paired with several of its own sentences
// must not be pushed away from them); strict_negatives restores the literal
// everything-else set. Anchors and negatives are visited in a canonical
// order sorted by (query_id, video_id), so the summed loss is exactly
// invariant to batch permutation.
template <class S>
inline S triplet_loss(const JointPoints<S>& pts, S margin, bool strict_negatives,
                      std::vector<std::vector<S>>* dvp = nullptr,
                      std::vector<std::vector<S>>* dtp = nullptr) {
  const size_t n = pts.size();
  if (n < 2) throw DataError("triplet_loss: batch must hold at least 2 pairs");
  if (margin < S(0)) throw DataError("triplet_loss: negative margin");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (pts.query_id[a] != pts.query_id[b]) return pts.query_id[a] < pts.query_id[b];
    if (pts.video_id[a] != pts.video_id[b]) return pts.video_id[a] < pts.video_id[b];
    return a < b;
  });

  const size_t D = pts.vp[0].size();
  std::vector<S> sim(n * n);  // sim[i*n+j] = S(vp_i, tp_j)
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      sim[i * n + j] = cosine(pts.vp[i].data(), pts.tp[j].data(), D);

  if (dvp) {
    dvp->assign(n, std::vector<S>(D, S(0)));
    dtp->assign(n, std::vector<S>(D, S(0)));
  }
  auto add_sim_grad = [&](size_t i, size_t j, S g) {
    cosine_backward(pts.vp[i].data(), pts.tp[j].data(), D, g,
                    (*dvp)[i].data(), (*dtp)[j].data());
  };

  S loss = S(0);
  for (size_t oi = 0; oi < n; ++oi) {
    const size_t i = order[oi];
    const S pos = sim[i * n + i];
    for (size_t oj = 0; oj < n; ++oj) {
      const size_t j = order[oj];
      const bool negative = strict_negatives ? (j != i)
                                             : (pts.video_id[j] != pts.video_id[i]);
      if (!negative) continue;
      const S t_term = margin - pos + sim[i * n + j];  // wrong sentence for video i
      if (t_term > S(0)) {
        loss += t_term;
        if (dvp) {
          add_sim_grad(i, i, S(-1));
          add_sim_grad(i, j, S(1));
        }
      }
      const S v_term = margin - pos + sim[j * n + i];  // wrong video for sentence i
      if (v_term > S(0)) {
        loss += v_term;
        if (dvp) {
          add_sim_grad(i, i, S(-1));
          add_sim_grad(j, i, S(1));
        }
      }
    }
  }
  return loss;
}

template <class S>
struct BatchForwardResult {
  S loss = S(0);
  JointPoints<S> points;
};

// Full pipeline over one batch: encode each sentence, pool its video with
// text-guided attention (train mode), project both sides, then the ranking
// loss. When grads is non-null every parameter gradient is accumulated into
// it, pairs visited in batch order.
template <class S>
inline BatchForwardResult<S> batch_forward(const Model<S>& m,
                                           const std::vector<BatchPair>& batch,
                                           S margin, double dropout_rate, Rng* rng,
                                           bool strict_negatives,
                                           Model<S>* grads = nullptr) {
  const size_t n = batch.size();
  BatchForwardResult<S> result;
  JointPoints<S>& pts = result.points;

  std::vector<GruCache<S>> gru(grads ? n : 0);
  std::vector<TgaCache<S>> tga_cache(grads ? n : 0);
  std::vector<std::vector<S>> ws(n), fs(n);

  for (size_t p = 0; p < n; ++p) {
    const BatchPair& pair = batch[p];
    std::vector<S> w = embed_sentence(m, pair.tokens, grads ? &gru[p] : nullptr);
    std::vector<S> f = text_guided_feature(m, *pair.video, w, /*train_mode=*/true,
                                           dropout_rate, rng,
                                           grads ? &tga_cache[p] : nullptr);
    pts.query_id.push_back(pair.query_id);
    pts.video_id.push_back(pair.video->video_id);
    pts.vp.push_back(joint_project(m.Wv, f));
    pts.tp.push_back(joint_project(m.Wt, w));
    ws[p] = std::move(w);
    fs[p] = std::move(f);
  }

  std::vector<std::vector<S>> dvp, dtp;
  result.loss = triplet_loss(pts, margin, strict_negatives,
                             grads ? &dvp : nullptr, grads ? &dtp : nullptr);
  if (!grads) return result;

  for (size_t p = 0; p < n; ++p) {
    std::vector<S> df, dw_proj;
    joint_project_backward(m.Wv, fs[p], dvp[p], grads->Wv, &df);
    joint_project_backward(m.Wt, ws[p], dtp[p], grads->Wt, &dw_proj);
    std::vector<S> dw = text_guided_feature_backward(m, tga_cache[p], df, *grads);
    for (size_t i = 0; i < dw.size(); ++i) dw[i] += dw_proj[i];
    embed_sentence_backward(m, gru[p], dw, *grads);
  }
  return result;
}

}  // namespace tga
