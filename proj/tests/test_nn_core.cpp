#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "tga/adam.hpp"
#include "tga/gradcheck.hpp"
#include "tga/kernels.hpp"
#include "tga/model.hpp"
#include "tga/rng.hpp"
#include "tga/selfcheck.hpp"

using namespace tga;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.vocab_size = 8;
  d.word_dim = 3;
  d.text_dim = 4;
  d.feature_dim = 5;
  d.joint_dim = 3;
  return d;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Model<double> conditioned_model(uint64_t seed) {
  Rng rng(seed);
  Model<double> m = init_model<double>(small_dims(), rng);
  // fresh-init embeddings are near zero; scale them up so downstream vectors
  // have usable norms (matches the pipeline fixture's conditioning)
  for (double& x : m.emb.data) x *= 100.0;
  return m;
}

}  // namespace

TEST_CASE("gru cell with zero parameters halves a carried hidden state") {
  const ModelDims d = small_dims();
  const Model<double> m(d);
  const std::vector<double> h0 = {0.3, -0.7, 0.1, 0.9};
  std::vector<double> h = h0;
  const std::vector<double> e(d.word_dim, 1.25);
  gru_step(m, e, h);
  for (size_t i = 0; i < h.size(); ++i) CHECK(h[i] == 0.5 * h0[i]);
}

TEST_CASE("gru with zero parameters embeds every sentence to zero") {
  const Model<double> m(small_dims());
  const std::vector<double> w = embed_sentence(m, {0, 3, 7});
  for (double x : w) CHECK(x == 0.0);
}

TEST_CASE("sentence encoder validates its tokens") {
  const Model<double> m(small_dims());
  CHECK_THROWS_AS((void)embed_sentence(m, {}), DataError);
  CHECK_THROWS_AS((void)embed_sentence(m, {0, 8}), DataError);
}

TEST_CASE("gru hidden state stays strictly inside the unit box") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Model<double> m = init_model<double>(small_dims(), rng);
    for (double& x : m.emb.data) x *= 500.0;  // stress the gates
    std::vector<uint32_t> tokens(6);
    for (auto& t : tokens) t = static_cast<uint32_t>(rng.index(small_dims().vocab_size));
    const std::vector<double> w = embed_sentence(m, tokens);
    for (double x : w) {
      CHECK(std::abs(x) < 1.0);
      CHECK(std::isfinite(x));
    }
  }
}

TEST_CASE("sentence encoder gradients match finite differences") {
  const ModelDims d = small_dims();
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Model<double> m = conditioned_model(seed);
    Rng rng(seed * 31 + 5);
    std::vector<uint32_t> tokens(4);
    for (auto& t : tokens) t = static_cast<uint32_t>(rng.index(d.vocab_size));
    std::vector<double> u(d.text_dim);
    for (auto& x : u) x = rng.normal();

    const auto probe = [&](const Model<double>& mm) {
      return dot(embed_sentence(mm, tokens), u);
    };
    GruCache<double> cache;
    (void)embed_sentence(m, tokens, &cache);
    Model<double> grads(d);
    embed_sentence_backward(m, cache, u, grads);

    const GradCheckReport report = grad_check(probe, m, grads, 1e-5, 1e-4, 200, seed * 7 + 1);
    CHECK(report.pass);
  }
}

TEST_CASE("video transform applies weights then a rectifier") {
  const ModelDims d = small_dims();
  Model<double> m(d);
  for (uint32_t i = 0; i < d.text_dim; ++i) m.fc_W.at(i, i) = 1.0;
  const std::vector<double> v = {3.0, -2.0, 5.0, 0.5, 9.0};
  const std::vector<double> out = fc_video_transform<double>(m, v.data(), false, 0.0, nullptr);
  REQUIRE(out.size() == 4);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 5.0);
  CHECK(out[3] == 0.5);
}

TEST_CASE("a dead rectifier blocks both output and gradient") {
  const ModelDims d = small_dims();
  Rng rng(17);
  Model<double> m = init_model<double>(d, rng);
  for (auto& b : m.fc_b.data) b = -1000.0;
  const std::vector<double> v = {1, 2, 3, 4, 5};
  FcCache<double> cache;
  const std::vector<double> out =
      fc_video_transform<double>(m, v.data(), false, 0.0, nullptr, &cache);
  for (double x : out) CHECK(x == 0.0);

  Model<double> grads(d);
  std::vector<double> dinput;
  fc_video_transform_backward(m, cache, std::vector<double>(d.text_dim, 1.0), grads, &dinput);
  for (double g : grads.fc_W.data) CHECK(g == 0.0);
  for (double g : grads.fc_b.data) CHECK(g == 0.0);
  for (double g : dinput) CHECK(g == 0.0);
}

TEST_CASE("video transform gradients match finite differences") {
  const ModelDims d = small_dims();
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed + 100);
    Model<double> m = init_model<double>(d, rng);
    std::vector<double> v(d.feature_dim), u(d.text_dim);
    // keep every pre-activation clear of the rectifier kink
    for (int tries = 0;; ++tries) {
      REQUIRE(tries < 100);
      for (auto& x : v) x = rng.normal(0.0, 2.0);
      std::vector<double> pre(d.text_dim);
      matvec(m.fc_W, v.data(), pre.data());
      bool ok = true;
      for (uint32_t i = 0; i < d.text_dim; ++i)
        if (std::abs(pre[i] + m.fc_b[i]) < 1e-3) ok = false;
      if (ok) break;
    }
    for (auto& x : u) x = rng.normal();

    const auto probe = [&](const Model<double>& mm) {
      return dot(fc_video_transform<double>(mm, v.data(), false, 0.0, nullptr), u);
    };
    FcCache<double> cache;
    (void)fc_video_transform<double>(m, v.data(), false, 0.0, nullptr, &cache);
    Model<double> grads(d);
    std::vector<double> dinput;
    fc_video_transform_backward(m, cache, u, grads, &dinput);

    const GradCheckReport report = grad_check(probe, m, grads, 1e-5, 1e-4, 200, seed * 3 + 2);
    CHECK(report.pass);

    for (size_t i = 0; i < v.size(); ++i) {
      const double h = 1e-5;
      std::vector<double> vp = v, vm = v;
      vp[i] += h;
      vm[i] -= h;
      const double fd = (dot(fc_video_transform<double>(m, vp.data(), false, 0.0, nullptr), u) -
                         dot(fc_video_transform<double>(m, vm.data(), false, 0.0, nullptr), u)) /
                        (2 * h);
      const double rel = std::abs(fd - dinput[i]) / std::max(1e-5, std::abs(fd) + std::abs(dinput[i]));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("eval mode ignores dropout and leaves the random stream alone") {
  const ModelDims d = small_dims();
  Rng rng(9);
  Model<double> m = init_model<double>(d, rng);
  const std::vector<double> v = {1, -1, 2, -2, 3};
  Rng stream(55);
  const std::vector<double> with_rng =
      fc_video_transform<double>(m, v.data(), false, 0.9, &stream, nullptr);
  const std::vector<double> without =
      fc_video_transform<double>(m, v.data(), false, 0.0, nullptr, nullptr);
  CHECK(with_rng == without);
  CHECK(stream.uniform() == Rng(55).uniform());
}

TEST_CASE("dropout scaling is unbiased over many masks") {
  const ModelDims d = small_dims();
  Model<double> m(d);
  for (uint32_t i = 0; i < d.text_dim; ++i) m.fc_W.at(i, i) = 1.0;
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> ref = fc_video_transform<double>(m, v.data(), false, 0.0, nullptr);

  Rng rng(42);
  std::vector<double> acc(d.text_dim, 0.0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const std::vector<double> out = fc_video_transform<double>(m, v.data(), true, 0.5, &rng);
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += out[i];
  }
  for (size_t i = 0; i < acc.size(); ++i)
    CHECK(std::abs(acc[i] / trials - ref[i]) <= 0.02 * ref[i]);
}

TEST_CASE("dropped components contribute no gradient") {
  const ModelDims d = small_dims();
  Rng rng(77);
  Model<double> m = init_model<double>(d, rng);
  const std::vector<double> v = {2, 5, -1, 3, 4};
  FcCache<double> cache;
  Rng stream(3);
  (void)fc_video_transform<double>(m, v.data(), true, 0.5, &stream, &cache);

  Model<double> grads(d);
  const std::vector<double> ones(d.text_dim, 1.0);
  fc_video_transform_backward(m, cache, ones, grads);
  for (uint32_t i = 0; i < d.text_dim; ++i) {
    const double expected = cache.pre[i] > 0.0 ? cache.mask[i] : 0.0;
    CHECK(grads.fc_b[i] == expected);
    for (uint32_t j = 0; j < d.feature_dim; ++j)
      CHECK(grads.fc_W.at(i, j) == expected * cache.input[j]);
  }
}

TEST_CASE("joint projection is a plain matrix product") {
  SUBCASE("identity") {
    Tensor<double> W({3, 3});
    for (uint32_t i = 0; i < 3; ++i) W.at(i, i) = 1.0;
    const std::vector<double> x = {0.5, -2.0, 7.0};
    CHECK(joint_project(W, x) == x);
  }
  SUBCASE("zero matrix") {
    const Tensor<double> W({3, 4});
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> y = joint_project(W, x);
    for (double v : y) CHECK(v == 0.0);
    Tensor<double> dW({3, 4});
    std::vector<double> dx;
    joint_project_backward(W, x, {1.0, 2.0, 3.0}, dW, &dx);
    for (double v : dx) CHECK(v == 0.0);
    for (uint32_t i = 0; i < 3; ++i)
      for (uint32_t j = 0; j < 4; ++j) CHECK(dW.at(i, j) == double(i + 1) * x[j]);
  }
  SUBCASE("random 5x3 against a hand loop") {
    Rng rng(12);
    Tensor<double> W({5, 3});
    for (auto& w : W.data) w = rng.normal();
    std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
    const std::vector<double> y = joint_project(W, x);
    for (uint32_t i = 0; i < 5; ++i) {
      double s = 0;
      for (uint32_t j = 0; j < 3; ++j) s += W.at(i, j) * x[j];
      CHECK(y[i] == s);
    }
  }
  SUBCASE("dimension mismatch") {
    const Tensor<double> W({3, 4});
    CHECK_THROWS_AS((void)joint_project(W, {1.0, 2.0}), NumericError);
  }
}

TEST_CASE("joint projection gradients match finite differences") {
  const ModelDims d = small_dims();
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed + 40);
    Model<double> m = init_model<double>(d, rng);
    std::vector<double> x(d.feature_dim), u(d.joint_dim);
    for (auto& v : x) v = rng.normal();
    for (auto& v : u) v = rng.normal();

    const auto probe = [&](const Model<double>& mm) {
      return dot(joint_project(mm.Wv, x), u);
    };
    Model<double> grads(d);
    joint_project_backward(m.Wv, x, u, grads.Wv);
    const GradCheckReport report = grad_check(probe, m, grads, 1e-5, 1e-4, 200, seed);
    CHECK(report.pass);
    CHECK(report.worst().max_rel_err < 1e-7);
  }
}

TEST_CASE("adam skips tensors whose gradient is identically zero") {
  const ModelDims d = small_dims();
  Rng rng(8);
  Model<double> params = init_model<double>(d, rng);
  const Model<double> before = params;
  Adam<double> opt(d);
  Model<double> grads(d);

  opt.apply(params, grads, 0.1);
  CHECK(opt.step == 1);
  params.for_each([&](const char* name, const Tensor<double>& t) {
    CHECK(t.data == before.find(name)->data);
  });
  opt.m1.for_each([](const char*, const Tensor<double>& t) {
    for (double x : t.data) CHECK(x == 0.0);
  });

  grads.Wv.data[0] = 1.0;
  opt.apply(params, grads, 0.1);
  CHECK(opt.step == 2);
  CHECK(params.Wv.data[0] != before.Wv.data[0]);
  CHECK(params.Wv.data[1] == before.Wv.data[1]);
  CHECK(params.emb.data == before.emb.data);
  for (double x : opt.m1.emb.data) CHECK(x == 0.0);
}

TEST_CASE("first adam step moves by minus lr times the gradient sign") {
  const ModelDims d = small_dims();
  Rng rng(19);
  Model<double> params = init_model<double>(d, rng);
  const Model<double> before = params;
  Model<double> grads(d);
  for (size_t i = 0; i < grads.Wv.data.size(); ++i)
    grads.Wv.data[i] = (i % 2 == 0) ? 0.7 : -1.3;

  Adam<double> opt(d);
  opt.apply(params, grads, 0.1);
  for (size_t i = 0; i < params.Wv.data.size(); ++i) {
    const double moved = params.Wv.data[i] - before.Wv.data[i];
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    CHECK(std::abs(moved + 0.1 * sign) < 1e-6);
  }
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  const ModelDims d = small_dims();
  Model<double> params(d);
  for (auto& x : params.fc_b.data) x = 1.0;
  Adam<double> opt(d);
  Model<double> grads(d);
  for (int step = 0; step < 100; ++step) {
    for (size_t i = 0; i < params.fc_b.data.size(); ++i)
      grads.fc_b.data[i] = 2.0 * params.fc_b.data[i];
    opt.apply(params, grads, 0.1);
  }
  for (double x : params.fc_b.data) CHECK(std::abs(x) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients by tensor name") {
  const ModelDims d = small_dims();
  Rng rng(2);
  Model<double> params = init_model<double>(d, rng);
  Model<double> grads(d);
  grads.Wt.data[0] = std::numeric_limits<double>::infinity();
  Adam<double> opt(d);
  std::string msg;
  try {
    opt.apply(params, grads, 0.1);
  } catch (const NumericError& e) {
    msg = e.what();
  }
  CHECK(msg.find("Wt") != std::string::npos);
}

TEST_CASE("finite difference checker trusts an exact linear gradient") {
  const ModelDims d = small_dims();
  Rng rng(6);
  Model<double> params = init_model<double>(d, rng);
  std::vector<double> coeff(params.Wv.data.size());
  for (auto& c : coeff) c = rng.normal();

  const auto probe = [&](const Model<double>& mm) {
    double s = 0;
    for (size_t i = 0; i < coeff.size(); ++i) s += coeff[i] * mm.Wv.data[i];
    return s;
  };
  Model<double> analytic(d);
  analytic.Wv.data = coeff;

  const GradCheckReport report = grad_check(probe, params, analytic, 1e-5, 1e-4, 200, 1);
  CHECK(report.pass);
  CHECK(report.worst().max_rel_err < 1e-9);
  CHECK(report.tensors.size() == 14);
}

TEST_CASE("zero tolerance fails every check") {
  const ModelDims d = small_dims();
  Rng rng(6);
  Model<double> params = init_model<double>(d, rng);
  const auto probe = [](const Model<double>& mm) { return mm.Wv.data[0]; };
  Model<double> analytic(d);
  analytic.Wv.data[0] = 1.0;
  const GradCheckReport report = grad_check(probe, params, analytic, 1e-5, 0.0, 200, 1);
  CHECK_FALSE(report.pass);
}

TEST_CASE("non-deterministic probes are rejected") {
  const ModelDims d = small_dims();
  Rng rng(6);
  Model<double> params = init_model<double>(d, rng);
  Model<double> analytic(d);
  int calls = 0;
  const auto probe = [&calls](const Model<double>&) { return double(calls++); };
  CHECK_THROWS_AS((void)grad_check(probe, params, analytic, 1e-5, 1e-4, 200, 1), NumericError);
}

TEST_CASE("full pipeline gradients pass on a two-pair batch") {
  const PipelineFixture fx = make_pipeline_fixture(3, 2);
  const std::vector<BatchPair> batch = fx.pairs();
  const double margin = fx.margin;
  const auto probe = [&](const Model<double>& mm) {
    return batch_forward<double>(mm, batch, margin, 0.0, nullptr, false).loss;
  };
  Model<double> fxm = fx.model;
  Model<double> analytic(fx.dims);
  (void)batch_forward<double>(fxm, batch, margin, 0.0, nullptr, false, &analytic);
  const GradCheckReport report = grad_check(probe, fxm, analytic, 1e-5, 1e-4, 200, 4);
  CHECK(report.pass);
}

TEST_CASE("pipeline self-check passes across seeds") {
  for (uint64_t seed : {1, 2, 3, 7, 11}) {
    const GradCheckReport report = run_pipeline_gradcheck(seed, 1e-4);
    CHECK(report.pass);
    CHECK(report.tensors.size() == 14);
  }
}
