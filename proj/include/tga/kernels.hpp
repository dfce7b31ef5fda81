#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tga/error.hpp"
#include "tga/model.hpp"
#include "tga/rng.hpp"
#include "tga/tensor.hpp"

namespace tga {

// y = W x, W: [out, in]
template <class S>
inline void matvec(const Tensor<S>& W, const S* x, S* y) {
  const uint32_t rows = W.rows(), cols = W.cols();
  for (uint32_t r = 0; r < rows; ++r) {
    S acc = S(0);
    const S* wr = W.data.data() + static_cast<size_t>(r) * cols;
    for (uint32_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// y += W^T g, W: [out, in], g: [out], y: [in]
template <class S>
inline void matvec_transpose_acc(const Tensor<S>& W, const S* g, S* y) {
  const uint32_t rows = W.rows(), cols = W.cols();
  for (uint32_t r = 0; r < rows; ++r) {
    const S gr = g[r];
    if (gr == S(0)) continue;
    const S* wr = W.data.data() + static_cast<size_t>(r) * cols;
    for (uint32_t c = 0; c < cols; ++c) y[c] += gr * wr[c];
  }
}

// dW += g x^T, g: [out], x: [in]
template <class S>
inline void outer_acc(Tensor<S>& dW, const S* g, const S* x) {
  const uint32_t rows = dW.rows(), cols = dW.cols();
  for (uint32_t r = 0; r < rows; ++r) {
    const S gr = g[r];
    if (gr == S(0)) continue;
    S* wr = dW.data.data() + static_cast<size_t>(r) * cols;
    for (uint32_t c = 0; c < cols; ++c) wr[c] += gr * x[c];
  }
}

template <class S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// ---------------------------------------------------------------------------
// Sentence encoder: embedding lookup + GRU over the sequence, zero initial
// hidden state, final hidden state is the sentence feature.
//
//   z = sigmoid(Wz e + Uz h + bz)
//   r = sigmoid(Wr e + Ur h + br)
//   c = tanh(Wh e + Uh (r*h) + bh)
//   h' = (1 - z)*h + z*c

template <class S>
struct GruStepCache {
  std::vector<S> z, r, c, rh;
};

// One cell update; h is advanced in place.
template <class S>
inline void gru_step(const Model<S>& m, const std::vector<S>& e, std::vector<S>& h,
                     GruStepCache<S>* cache = nullptr) {
  const uint32_t T = m.dims.text_dim;
  std::vector<S> z(T), r(T), c(T), tmp(T);
  matvec(m.gru_Wz, e.data(), z.data());
  matvec(m.gru_Uz, h.data(), tmp.data());
  for (uint32_t i = 0; i < T; ++i) z[i] = sigmoid(z[i] + tmp[i] + m.gru_bz[i]);

  matvec(m.gru_Wr, e.data(), r.data());
  matvec(m.gru_Ur, h.data(), tmp.data());
  for (uint32_t i = 0; i < T; ++i) r[i] = sigmoid(r[i] + tmp[i] + m.gru_br[i]);

  std::vector<S> rh(T);
  for (uint32_t i = 0; i < T; ++i) rh[i] = r[i] * h[i];
  matvec(m.gru_Wh, e.data(), c.data());
  matvec(m.gru_Uh, rh.data(), tmp.data());
  for (uint32_t i = 0; i < T; ++i) c[i] = std::tanh(c[i] + tmp[i] + m.gru_bh[i]);

  for (uint32_t i = 0; i < T; ++i) h[i] = (S(1) - z[i]) * h[i] + z[i] * c[i];

  if (cache) {
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->c = std::move(c);
    cache->rh = std::move(rh);
  }
}

template <class S>
struct GruCache {
  std::vector<uint32_t> tokens;
  // per step, each [T]; h has steps+1 entries (h[0] = 0)
  std::vector<std::vector<S>> e, z, r, c, rh, h;
};

template <class S>
inline std::vector<S> embed_sentence(const Model<S>& m,
                                     const std::vector<uint32_t>& tokens,
                                     GruCache<S>* cache = nullptr) {
  if (tokens.empty()) throw DataError("embed_sentence: empty token sequence");
  const uint32_t T = m.dims.text_dim;
  const uint32_t W = m.dims.word_dim;
  for (uint32_t id : tokens)
    if (id >= m.dims.vocab_size)
      throw DataError("embed_sentence: token id " + std::to_string(id) +
                      " out of range (vocab " + std::to_string(m.dims.vocab_size) + ")");

  std::vector<S> h(T, S(0));
  if (cache) {
    cache->tokens = tokens;
    cache->e.clear(); cache->z.clear(); cache->r.clear();
    cache->c.clear(); cache->rh.clear(); cache->h.clear();
    cache->h.push_back(h);
  }
  for (uint32_t id : tokens) {
    std::vector<S> e(m.emb.data.data() + static_cast<size_t>(id) * W,
                     m.emb.data.data() + static_cast<size_t>(id + 1) * W);
    GruStepCache<S> step;
    gru_step(m, e, h, cache ? &step : nullptr);
    if (cache) {
      cache->e.push_back(std::move(e));
      cache->z.push_back(std::move(step.z));
      cache->r.push_back(std::move(step.r));
      cache->c.push_back(std::move(step.c));
      cache->rh.push_back(std::move(step.rh));
      cache->h.push_back(h);
    }
  }
  return h;
}

// Backpropagation through time; dw is the gradient at the final hidden state.
template <class S>
inline void embed_sentence_backward(const Model<S>& m, const GruCache<S>& cache,
                                    const std::vector<S>& dw, Model<S>& grads) {
  const uint32_t T = m.dims.text_dim;
  const uint32_t W = m.dims.word_dim;
  const size_t steps = cache.tokens.size();

  std::vector<S> gh = dw;
  std::vector<S> dz(T), dc(T), dr(T), drh(T), gh_prev(T), de(W);
  for (size_t t = steps; t-- > 0;) {
    const auto& z = cache.z[t];
    const auto& r = cache.r[t];
    const auto& c = cache.c[t];
    const auto& rh = cache.rh[t];
    const auto& hprev = cache.h[t];
    const auto& e = cache.e[t];

    for (uint32_t i = 0; i < T; ++i) {
      dz[i] = gh[i] * (c[i] - hprev[i]);
      dc[i] = gh[i] * z[i];
      gh_prev[i] = gh[i] * (S(1) - z[i]);
    }
    // tanh and sigmoid derivatives applied at the pre-activations
    for (uint32_t i = 0; i < T; ++i) dc[i] *= (S(1) - c[i] * c[i]);
    std::fill(drh.begin(), drh.end(), S(0));
    matvec_transpose_acc(m.gru_Uh, dc.data(), drh.data());
    for (uint32_t i = 0; i < T; ++i) {
      dr[i] = drh[i] * hprev[i];
      gh_prev[i] += drh[i] * r[i];
    }
    for (uint32_t i = 0; i < T; ++i) {
      dz[i] *= z[i] * (S(1) - z[i]);
      dr[i] *= r[i] * (S(1) - r[i]);
    }

    outer_acc(grads.gru_Wz, dz.data(), e.data());
    outer_acc(grads.gru_Uz, dz.data(), hprev.data());
    for (uint32_t i = 0; i < T; ++i) grads.gru_bz[i] += dz[i];
    outer_acc(grads.gru_Wr, dr.data(), e.data());
    outer_acc(grads.gru_Ur, dr.data(), hprev.data());
    for (uint32_t i = 0; i < T; ++i) grads.gru_br[i] += dr[i];
    outer_acc(grads.gru_Wh, dc.data(), e.data());
    outer_acc(grads.gru_Uh, dc.data(), rh.data());
    for (uint32_t i = 0; i < T; ++i) grads.gru_bh[i] += dc[i];

    matvec_transpose_acc(m.gru_Uz, dz.data(), gh_prev.data());
    matvec_transpose_acc(m.gru_Ur, dr.data(), gh_prev.data());

    std::fill(de.begin(), de.end(), S(0));
    matvec_transpose_acc(m.gru_Wz, dz.data(), de.data());
    matvec_transpose_acc(m.gru_Wr, dr.data(), de.data());
    matvec_transpose_acc(m.gru_Wh, dc.data(), de.data());
    S* erow = grads.emb.data.data() + static_cast<size_t>(cache.tokens[t]) * W;
    for (uint32_t i = 0; i < W; ++i) erow[i] += de[i];

    gh = gh_prev;
  }
}

// ---------------------------------------------------------------------------
// Per-unit transform: dropout(relu(fc.W v + fc.b)). Inverted dropout: kept
// components are scaled by 1/(1-rate) during training, eval is the identity.

template <class S>
struct FcCache {
  std::vector<S> input;  // raw unit feature, length V
  std::vector<S> pre;    // pre-activation, length T
  std::vector<S> mask;   // dropout scale per component (1 everywhere in eval)
};

// In train mode with rate > 0 the mask is drawn from rng, one uniform per
// component in order; otherwise the stream is untouched.
template <class S>
inline std::vector<S> fc_video_transform(const Model<S>& m, const S* v,
                                         bool train_mode, double dropout_rate,
                                         Rng* rng, FcCache<S>* cache = nullptr) {
  const uint32_t T = m.dims.text_dim;
  const uint32_t V = m.dims.feature_dim;
  std::vector<S> pre(T);
  matvec(m.fc_W, v, pre.data());
  for (uint32_t i = 0; i < T; ++i) pre[i] += m.fc_b[i];

  std::vector<S> mask(T, S(1));
  if (train_mode && dropout_rate > 0.0) {
    if (!rng) throw NumericError("fc_video_transform: dropout needs a random stream");
    const S keep_scale = static_cast<S>(1.0 / (1.0 - dropout_rate));
    for (uint32_t i = 0; i < T; ++i)
      mask[i] = rng->uniform() < dropout_rate ? S(0) : keep_scale;
  }

  std::vector<S> out(T);
  for (uint32_t i = 0; i < T; ++i) {
    const S relu = pre[i] > S(0) ? pre[i] : S(0);
    out[i] = relu * mask[i];
  }
  if (cache) {
    cache->input.assign(v, v + V);
    cache->pre = std::move(pre);
    cache->mask = std::move(mask);
  }
  return out;
}

template <class S>
inline void fc_video_transform_backward(const Model<S>& m, const FcCache<S>& cache,
                                        const std::vector<S>& dout, Model<S>& grads,
                                        std::vector<S>* dinput = nullptr) {
  const uint32_t T = m.dims.text_dim;
  std::vector<S> dpre(T);
  for (uint32_t i = 0; i < T; ++i)
    dpre[i] = cache.pre[i] > S(0) ? dout[i] * cache.mask[i] : S(0);
  outer_acc(grads.fc_W, dpre.data(), cache.input.data());
  for (uint32_t i = 0; i < T; ++i) grads.fc_b[i] += dpre[i];
  if (dinput) {
    dinput->assign(m.dims.feature_dim, S(0));
    matvec_transpose_acc(m.fc_W, dpre.data(), dinput->data());
  }
}

// ---------------------------------------------------------------------------
// Joint-space projection: plain matrix-vector product.

template <class S>
inline std::vector<S> joint_project(const Tensor<S>& W, const std::vector<S>& x) {
  if (W.cols() != x.size())
    throw NumericError("joint_project: dimension mismatch");
  std::vector<S> y(W.rows());
  matvec(W, x.data(), y.data());
  return y;
}

template <class S>
inline void joint_project_backward(const Tensor<S>& W, const std::vector<S>& x,
                                   const std::vector<S>& dy, Tensor<S>& dW,
                                   std::vector<S>* dx = nullptr) {
  outer_acc(dW, dy.data(), x.data());
  if (dx) {
    dx->assign(x.size(), S(0));
    matvec_transpose_acc(W, dy.data(), dx->data());
  }
}

}  // namespace tga
