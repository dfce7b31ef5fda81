#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tga/dataio.hpp"
#include "tga/error.hpp"
#include "tga/kernels.hpp"
#include "tga/model.hpp"

namespace tga {

struct AttentionTrace {
  std::string query_id;
  std::string video_id;
  std::vector<double> weights;  // one per unit, nonnegative, sums to 1
};

template <class S>
inline S dot(const S* a, const S* b, size_t n) {
  S acc = S(0);
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class S>
inline S norm2(const S* a, size_t n) {
  return std::sqrt(dot(a, a, n));
}

// Cosine similarity; a zero-norm side yields 0 (the neutral value) and sets
// the degenerate flag instead of throwing, since noisy data can produce
// near-zero vectors.
template <class S>
inline S cosine(const S* a, const S* b, size_t n, bool* degenerate = nullptr) {
  const S na = norm2(a, n);
  const S nb = norm2(b, n);
  if (na == S(0) || nb == S(0)) {
    if (degenerate) *degenerate = true;
    return S(0);
  }
  return dot(a, b, n) / (na * nb);
}

template <class S>
inline S cosine(const std::vector<S>& a, const std::vector<S>& b,
                bool* degenerate = nullptr) {
  if (a.size() != b.size()) throw NumericError("cosine: length mismatch");
  return cosine(a.data(), b.data(), a.size(), degenerate);
}

// d(cos)/da accumulated into da (and symmetrically db), given upstream g.
template <class S>
inline void cosine_backward(const S* a, const S* b, size_t n, S g,
                            S* da, S* db) {
  const S na = norm2(a, n);
  const S nb = norm2(b, n);
  if (na == S(0) || nb == S(0)) return;  // flat zero extension
  const S c = dot(a, b, n) / (na * nb);
  const S inv = S(1) / (na * nb);
  for (size_t i = 0; i < n; ++i) {
    if (da) da[i] += g * (b[i] * inv - c * a[i] / (na * na));
    if (db) db[i] += g * (a[i] * inv - c * b[i] / (nb * nb));
  }
}

template <class S>
inline std::vector<S> similarity_row(const std::vector<S>& w,
                                     const std::vector<std::vector<S>>& vbars) {
  std::vector<S> s(vbars.size());
  for (size_t k = 0; k < vbars.size(); ++k) {
    if (vbars[k].size() != w.size())
      throw NumericError("similarity_row: length mismatch at unit " + std::to_string(k));
    s[k] = cosine(w.data(), vbars[k].data(), w.size());
  }
  return s;
}

// Softmax along the temporal axis, max-subtracted for stability.
template <class S>
inline std::vector<S> temporal_softmax(const std::vector<S>& s) {
  if (s.empty()) throw NumericError("temporal_softmax: empty input");
  S mx = s[0];
  for (S x : s) {
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError("temporal_softmax: non-finite similarity");
    mx = std::max(mx, x);
  }
  std::vector<S> a(s.size());
  S total = S(0);
  for (size_t k = 0; k < s.size(); ++k) {
    a[k] = std::exp(s[k] - mx);
    total += a[k];
  }
  for (S& x : a) x /= total;
  return a;
}

// ds_k = a_k (g_k - sum_j g_j a_j)
template <class S>
inline std::vector<S> temporal_softmax_backward(const std::vector<S>& a,
                                                const std::vector<S>& g) {
  S inner = S(0);
  for (size_t j = 0; j < a.size(); ++j) inner += g[j] * a[j];
  std::vector<S> ds(a.size());
  for (size_t k = 0; k < a.size(); ++k) ds[k] = a[k] * (g[k] - inner);
  return ds;
}

// f = sum_k a_k v_k over the raw unit features.
template <class S>
inline std::vector<S> attention_pool(const std::vector<S>& weights,
                                     const VideoFeatures& video) {
  if (weights.size() != video.num_units)
    throw NumericError("attention_pool: weight count does not match unit count");
  std::vector<S> f(video.feature_dim, S(0));
  for (size_t k = 0; k < weights.size(); ++k) {
    const float* v = video.unit(k);
    const S a = weights[k];
    for (uint32_t i = 0; i < video.feature_dim; ++i) f[i] += a * static_cast<S>(v[i]);
  }
  return f;
}

// Everything the backward pass needs for one (sentence, video) composition.
template <class S>
struct TgaCache {
  const VideoFeatures* video = nullptr;
  std::vector<S> w;
  std::vector<FcCache<S>> fc;          // one per unit
  std::vector<std::vector<S>> vbar;    // transformed units
  std::vector<S> sims;
  std::vector<S> attn;
};

// The core composition: per-unit FC transform, cosine row against the
// sentence feature, temporal softmax, and pooling of the raw features.
// Dropout is drawn from rng only in train mode.
template <class S>
inline std::vector<S> text_guided_feature(const Model<S>& m, const VideoFeatures& video,
                                          const std::vector<S>& w, bool train_mode,
                                          double dropout_rate, Rng* rng,
                                          TgaCache<S>* cache = nullptr) {
  if (video.feature_dim != m.dims.feature_dim)
    throw DataError("text_guided_feature: video " + video.video_id +
                    " feature size does not match the model");
  const uint32_t nv = video.num_units;
  std::vector<std::vector<S>> vbar(nv);
  std::vector<S> vin(video.feature_dim);
  if (cache) {
    cache->video = &video;
    cache->w = w;
    cache->fc.resize(nv);
  }
  for (uint32_t k = 0; k < nv; ++k) {
    const float* raw = video.unit(k);
    for (uint32_t i = 0; i < video.feature_dim; ++i) vin[i] = static_cast<S>(raw[i]);
    vbar[k] = fc_video_transform(m, vin.data(), train_mode, dropout_rate, rng,
                                 cache ? &cache->fc[k] : nullptr);
  }
  std::vector<S> sims = similarity_row(w, vbar);
  std::vector<S> attn = temporal_softmax(sims);
  std::vector<S> f = attention_pool<S>(attn, video);
  if (cache) {
    cache->vbar = std::move(vbar);
    cache->sims = std::move(sims);
    cache->attn = std::move(attn);
  }
  return f;
}

// Backward through pooling, softmax, cosine row and the per-unit FC. df is
// the gradient at the pooled feature, dw_extra (optional) any gradient that
// reaches the sentence feature through other paths; the combined sentence
// gradient is returned for the caller to push through the encoder.
template <class S>
inline std::vector<S> text_guided_feature_backward(const Model<S>& m,
                                                   const TgaCache<S>& cache,
                                                   const std::vector<S>& df,
                                                   Model<S>& grads) {
  const VideoFeatures& video = *cache.video;
  const uint32_t nv = video.num_units;
  const uint32_t T = m.dims.text_dim;

  // through f = sum_k a_k v_k: grad reaches only the weights (v is data)
  std::vector<S> dattn(nv, S(0));
  for (uint32_t k = 0; k < nv; ++k) {
    const float* v = video.unit(k);
    S acc = S(0);
    for (uint32_t i = 0; i < video.feature_dim; ++i) acc += df[i] * static_cast<S>(v[i]);
    dattn[k] = acc;
  }

  const std::vector<S> dsims = temporal_softmax_backward(cache.attn, dattn);

  std::vector<S> dw(T, S(0));
  std::vector<S> dvbar(T);
  for (uint32_t k = 0; k < nv; ++k) {
    std::fill(dvbar.begin(), dvbar.end(), S(0));
    cosine_backward(cache.w.data(), cache.vbar[k].data(), T, dsims[k],
                    dw.data(), dvbar.data());
    fc_video_transform_backward(m, cache.fc[k], dvbar, grads);
  }
  return dw;
}

}  // namespace tga
