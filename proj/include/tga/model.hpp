#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "tga/rng.hpp"
#include "tga/tensor.hpp"

namespace tga {

struct ModelDims {
  uint32_t vocab_size = 0;
  uint32_t word_dim = 300;
  uint32_t text_dim = 1024;    // GRU hidden size T
  uint32_t feature_dim = 0;    // raw unit feature size V
  uint32_t joint_dim = 1024;   // joint space size D
};

// The full parameter set: word embeddings, GRU, the per-unit FC transform,
// and the two joint-space projections. Matrices are [out, in] row-major.
template <class S>
struct Model {
  ModelDims dims;

  Tensor<S> emb;                    // [vocab, word_dim]
  Tensor<S> gru_Wz, gru_Wr, gru_Wh; // [T, word_dim]
  Tensor<S> gru_Uz, gru_Ur, gru_Uh; // [T, T]
  Tensor<S> gru_bz, gru_br, gru_bh; // [T]
  Tensor<S> fc_W;                   // [T, V]
  Tensor<S> fc_b;                   // [T]
  Tensor<S> Wv;                     // [D, V]
  Tensor<S> Wt;                     // [D, T]

  Model() = default;

  explicit Model(const ModelDims& d) : dims(d) {
    emb = Tensor<S>(d.vocab_size, d.word_dim);
    gru_Wz = Tensor<S>(d.text_dim, d.word_dim);
    gru_Wr = Tensor<S>(d.text_dim, d.word_dim);
    gru_Wh = Tensor<S>(d.text_dim, d.word_dim);
    gru_Uz = Tensor<S>(d.text_dim, d.text_dim);
    gru_Ur = Tensor<S>(d.text_dim, d.text_dim);
    gru_Uh = Tensor<S>(d.text_dim, d.text_dim);
    gru_bz = Tensor<S>(d.text_dim);
    gru_br = Tensor<S>(d.text_dim);
    gru_bh = Tensor<S>(d.text_dim);
    fc_W = Tensor<S>(d.text_dim, d.feature_dim);
    fc_b = Tensor<S>(d.text_dim);
    Wv = Tensor<S>(d.joint_dim, d.feature_dim);
    Wt = Tensor<S>(d.joint_dim, d.text_dim);
  }

  // Fixed tensor order; the names double as the checkpoint tensor names.
  template <class F>
  void for_each(F&& f) {
    f("emb", emb);
    f("gru.Wz", gru_Wz);
    f("gru.Uz", gru_Uz);
    f("gru.bz", gru_bz);
    f("gru.Wr", gru_Wr);
    f("gru.Ur", gru_Ur);
    f("gru.br", gru_br);
    f("gru.Wh", gru_Wh);
    f("gru.Uh", gru_Uh);
    f("gru.bh", gru_bh);
    f("fc.W", fc_W);
    f("fc.b", fc_b);
    f("Wv", Wv);
    f("Wt", Wt);
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<Model*>(this)->for_each([&](const char* name, Tensor<S>& t) {
      f(name, static_cast<const Tensor<S>&>(t));
    });
  }

  Tensor<S>* find(const std::string& name) {
    Tensor<S>* hit = nullptr;
    for_each([&](const char* n, Tensor<S>& t) {
      if (name == n) hit = &t;
    });
    return hit;
  }

  const Tensor<S>* find(const std::string& name) const {
    return const_cast<Model*>(this)->find(name);
  }

  void zero() {
    for_each([](const char*, Tensor<S>& t) { t.fill(S(0)); });
  }

  // Name of the first tensor holding a non-finite value, or empty string.
  std::string first_non_finite() const {
    std::string bad;
    for_each([&](const char* name, const Tensor<S>& t) {
      if (!bad.empty()) return;
      for (const S& x : t.data) {
        if (!std::isfinite(static_cast<double>(x))) {
          bad = name;
          return;
        }
      }
    });
    return bad;
  }

  template <class T>
  Model<T> cast() const {
    Model<T> out;
    out.dims = dims;
    const_cast<Model*>(this)->for_each([&](const char* name, Tensor<S>& t) {
      *out.find(name) = t.template cast<T>();
    });
    return out;
  }
};

// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, word
// embeddings normal(0, 0.01). Draw order is the for_each order, row-major
// within a tensor, so the stream position after init is well defined.
template <class S>
inline Model<S> init_model(const ModelDims& dims, Rng& rng) {
  Model<S> m(dims);
  m.for_each([&](const char* name, Tensor<S>& t) {
    const std::string n = name;
    if (n == "emb") {
      for (auto& x : t.data) x = static_cast<S>(rng.normal(0.0, 0.01));
    } else if (t.dims.size() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols()));
      for (auto& x : t.data) x = static_cast<S>(rng.uniform(-bound, bound));
    }
    // rank-1 tensors are biases and stay zero
  });
  return m;
}

inline bool operator==(const ModelDims& a, const ModelDims& b) {
  return a.vocab_size == b.vocab_size && a.word_dim == b.word_dim &&
         a.text_dim == b.text_dim && a.feature_dim == b.feature_dim &&
         a.joint_dim == b.joint_dim;
}

}  // namespace tga
