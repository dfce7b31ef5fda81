#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "tga/error.hpp"
#include "tga/model.hpp"

namespace tga {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over the whole parameter set. One step counter covers
// all tensors. A tensor whose gradient is exactly zero everywhere is left
// untouched, moments included, so a satisfied batch moves nothing.
template <class S>
struct Adam {
  AdamConfig cfg;
  Model<S> m1, m2;
  uint64_t step = 0;

  explicit Adam(const ModelDims& dims, AdamConfig c = {})
      : cfg(c), m1(dims), m2(dims) {}

  void apply(Model<S>& params, const Model<S>& grads, double lr) {
    ++step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    params.for_each([&](const char* name, Tensor<S>& p) {
      const Tensor<S>* g = const_cast<Model<S>&>(grads).find(name);
      Tensor<S>* m = m1.find(name);
      Tensor<S>* v = m2.find(name);
      bool any = false;
      for (const S& x : g->data) {
        if (!std::isfinite(static_cast<double>(x)))
          throw NumericError(std::string("non-finite gradient in ") + name);
        if (x != S(0)) any = true;
      }
      if (!any) return;
      for (size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g->data[i]);
        double mi = cfg.beta1 * static_cast<double>(m->data[i]) + (1.0 - cfg.beta1) * gi;
        double vi = cfg.beta2 * static_cast<double>(v->data[i]) + (1.0 - cfg.beta2) * gi * gi;
        m->data[i] = static_cast<S>(mi);
        v->data[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p.data[i] = static_cast<S>(static_cast<double>(p.data[i]) -
                                   lr * mhat / (std::sqrt(vhat) + cfg.eps));
      }
    });
  }

  void apply(Model<S>& params, const Model<S>& grads) { apply(params, grads, cfg.lr); }
};

}  // namespace tga
