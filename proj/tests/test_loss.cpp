#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "tga/gradcheck.hpp"
#include "tga/loss.hpp"
#include "tga/model.hpp"
#include "tga/rng.hpp"
#include "tga/selfcheck.hpp"

using namespace tga;

namespace {

void add_point(JointPoints<double>& pts, const std::string& qid, const std::string& vid,
               std::vector<double> vp, std::vector<double> tp) {
  pts.query_id.push_back(qid);
  pts.video_id.push_back(vid);
  pts.vp.push_back(std::move(vp));
  pts.tp.push_back(std::move(tp));
}

double ref_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return d / std::sqrt(na) / std::sqrt(nb);
}

// Straight transcription of the ranking rule, no sorting, no shared state.
double naive_loss(const JointPoints<double>& pts, double margin, bool strict) {
  double total = 0;
  const size_t n = pts.size();
  for (size_t i = 0; i < n; ++i) {
    const double pos = ref_cosine(pts.vp[i], pts.tp[i]);
    for (size_t j = 0; j < n; ++j) {
      const bool negative = strict ? j != i : pts.video_id[j] != pts.video_id[i];
      if (!negative) continue;
      total += std::max(0.0, margin - pos + ref_cosine(pts.vp[i], pts.tp[j]));
      total += std::max(0.0, margin - pos + ref_cosine(pts.vp[j], pts.tp[i]));
    }
  }
  return total;
}

std::vector<double> unit_vector(Rng& rng, size_t d) {
  std::vector<double> v(d);
  double n = 0;
  do {
    n = 0;
    for (auto& x : v) {
      x = rng.normal();
      n += x * x;
    }
  } while (n < 1e-8);
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

JointPoints<double> random_points(Rng& rng, size_t n, size_t d, bool allow_shared_videos) {
  JointPoints<double> pts;
  for (size_t i = 0; i < n; ++i) {
    const size_t vid = allow_shared_videos ? rng.index(std::max<size_t>(2, n - 1)) : i;
    add_point(pts, "q" + std::to_string(i), "v" + std::to_string(vid),
              unit_vector(rng, d), unit_vector(rng, d));
  }
  return pts;
}

// Points built so every pairwise similarity is pinned by construction:
// orthonormal video sides, sentence sides mixing exactly two coordinates.
JointPoints<double> pinned_two_pair() {
  JointPoints<double> pts;
  add_point(pts, "q0", "a", {1, 0, 0, 0},
            {0.2, 0.1, std::sqrt(1.0 - 0.05), 0.0});
  add_point(pts, "q1", "b", {0, 1, 0, 0},
            {0.3, 0.2, 0.0, std::sqrt(1.0 - 0.13)});
  return pts;
}

}  // namespace

TEST_CASE("joint similarity is cosine in the shared space") {
  const std::vector<double> a = {1, 1};
  const std::vector<double> b = {1, 0};
  CHECK(joint_similarity(b, b) == 1.0);
  CHECK(joint_similarity(b, std::vector<double>{0, 1}) == 0.0);
  CHECK(std::abs(joint_similarity(a, b) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(joint_similarity(a, b) - 0.70711) < 1e-5);
}

TEST_CASE("satisfied margins produce zero loss and zero gradients") {
  JointPoints<double> pts;
  for (size_t i = 0; i < 4; ++i) {
    std::vector<double> e(4, 0.0);
    e[i] = 1.0;
    add_point(pts, "q" + std::to_string(i), "v" + std::to_string(i), e, e);
  }
  std::vector<std::vector<double>> dvp, dtp;
  const double loss = triplet_loss<double>(pts, 0.5, false, &dvp, &dtp);
  CHECK(loss == 0.0);
  for (const auto& g : dvp)
    for (double x : g) CHECK(x == 0.0);
  for (const auto& g : dtp)
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("a two-pair batch matches the hand-computed hinge values") {
  const JointPoints<double> pts = pinned_two_pair();
  // anchor q0: sentence-side hinge 0.1 - 0.2 + 0.3, video side sits on zero
  // anchor q1: video-side hinge 0.1 - 0.2 + 0.3, sentence side sits on zero
  const double loss = triplet_loss<double>(pts, 0.1, false);
  CHECK(std::abs(loss - 0.4) < 1e-12);
}

TEST_CASE("zero margin with equal similarities sits exactly on the kink") {
  JointPoints<double> pts;
  const std::vector<double> v = {3.0, 4.0};
  add_point(pts, "q0", "a", v, v);
  add_point(pts, "q1", "b", v, v);
  std::vector<std::vector<double>> dvp, dtp;
  const double loss = triplet_loss<double>(pts, 0.0, false, &dvp, &dtp);
  CHECK(loss == 0.0);
  for (const auto& g : dvp)
    for (double x : g) CHECK(x == 0.0);
  for (const auto& g : dtp)
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("brute force oracle agrees on every small batch") {
  Rng rng(100);
  for (int table = 0; table < 100; ++table) {
    const size_t n = 2 + rng.index(3);
    const size_t d = 2 + rng.index(4);
    const bool shared = table % 3 == 0;
    const JointPoints<double> pts = random_points(rng, n, d, shared);
    const double margin = 0.05 + 0.4 * rng.uniform();
    for (bool strict : {false, true}) {
      const double got = triplet_loss<double>(pts, margin, strict);
      const double want = naive_loss(pts, margin, strict);
      CHECK(std::abs(got - want) <= 1e-9);
    }
  }
}

TEST_CASE("loss never decreases as the margin grows") {
  Rng rng(200);
  for (int table = 0; table < 100; ++table) {
    const JointPoints<double> pts = random_points(rng, 2 + rng.index(3), 3, false);
    const double l1 = triplet_loss<double>(pts, 0.05, false);
    const double l2 = triplet_loss<double>(pts, 0.15, false);
    const double l3 = triplet_loss<double>(pts, 0.30, false);
    CHECK(l1 <= l2);
    CHECK(l2 <= l3);
    CHECK(l1 >= 0.0);
  }
}

TEST_CASE("permutation of the batch leaves the loss bit-identical") {
  Rng rng(300);
  const JointPoints<double> base = random_points(rng, 4, 3, false);
  const double reference = triplet_loss<double>(base, 0.2, false);
  std::vector<size_t> order = {0, 1, 2, 3};
  for (int shuffle = 0; shuffle < 10; ++shuffle) {
    rng.shuffle(order);
    JointPoints<double> permuted;
    for (size_t idx : order)
      add_point(permuted, base.query_id[idx], base.video_id[idx], base.vp[idx], base.tp[idx]);
    CHECK(triplet_loss<double>(permuted, 0.2, false) == reference);
  }
}

TEST_CASE("entries outside every active hinge get exactly zero gradient") {
  JointPoints<double> pts;
  add_point(pts, "q0", "a", {1, 0, 0, 0}, {0.15, 0.0, 0.0, std::sqrt(1.0 - 0.0225)});
  add_point(pts, "q1", "b", {0, 1, 0, 0},
            {0.3, 0.15, 0.0, std::sqrt(1.0 - 0.09 - 0.0225)});
  add_point(pts, "q2", "c", {0, 0, 1, 0}, {0.0, 0.0, std::sqrt(0.99), 0.1});
  std::vector<std::vector<double>> dvp, dtp;
  const double loss = triplet_loss<double>(pts, 0.1, false, &dvp, &dtp);
  CHECK(loss > 0.0);
  for (double x : dvp[2]) CHECK(x == 0.0);
  for (double x : dtp[2]) CHECK(x == 0.0);
  bool active = false;
  for (double x : dvp[0])
    if (x != 0.0) active = true;
  CHECK(active);
}

TEST_CASE("loss gradients match finite differences on the points") {
  Rng rng(400);
  int checked = 0;
  while (checked < 10) {
    JointPoints<double> pts = random_points(rng, 4, 3, false);
    const double margin = 0.2;

    // reject tables with a hinge term close to its kink
    bool near_kink = false;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double pos = ref_cosine(pts.vp[i], pts.tp[i]);
      for (size_t j = 0; j < pts.size(); ++j) {
        if (j == i) continue;
        if (std::abs(margin - pos + ref_cosine(pts.vp[i], pts.tp[j])) < 1e-3) near_kink = true;
        if (std::abs(margin - pos + ref_cosine(pts.vp[j], pts.tp[i])) < 1e-3) near_kink = true;
      }
    }
    if (near_kink) continue;
    ++checked;

    std::vector<std::vector<double>> dvp, dtp;
    (void)triplet_loss<double>(pts, margin, false, &dvp, &dtp);
    const double h = 1e-6;
    for (size_t i = 0; i < pts.size(); ++i) {
      for (size_t k = 0; k < pts.vp[i].size(); ++k) {
        for (int side = 0; side < 2; ++side) {
          auto& vec = side == 0 ? pts.vp[i] : pts.tp[i];
          const double analytic = side == 0 ? dvp[i][k] : dtp[i][k];
          const double keep = vec[k];
          vec[k] = keep + h;
          const double up = triplet_loss<double>(pts, margin, false);
          vec[k] = keep - h;
          const double down = triplet_loss<double>(pts, margin, false);
          vec[k] = keep;
          const double fd = (up - down) / (2 * h);
          CHECK(std::abs(fd - analytic) / std::max(1e-5, std::abs(fd) + std::abs(analytic)) <
                1e-4);
        }
      }
    }
  }
}

TEST_CASE("duplicating a pair doubles every surviving term") {
  const JointPoints<double> two = pinned_two_pair();
  const double base = triplet_loss<double>(two, 0.1, false);

  JointPoints<double> three;
  add_point(three, "q0", "a", two.vp[0], two.tp[0]);
  add_point(three, "q0dup", "a", two.vp[0], two.tp[0]);
  add_point(three, "q1", "b", two.vp[1], two.tp[1]);
  const double doubled = triplet_loss<double>(three, 0.1, false);
  CHECK(std::abs(doubled - 2.0 * base) < 1e-12);

  // literal all-others adds the duplicate's own terms at exactly the margin
  const double strict = triplet_loss<double>(three, 0.1, true);
  CHECK(strict > doubled);
}

TEST_CASE("same-video entries are not negatives unless asked") {
  JointPoints<double> pts;
  add_point(pts, "q0", "a", {1, 0, 0, 0}, {0.2, 0.1, std::sqrt(1.0 - 0.05), 0.0});
  add_point(pts, "q1", "a", {0, 1, 0, 0}, {0.3, 0.2, 0.0, std::sqrt(1.0 - 0.13)});
  CHECK(triplet_loss<double>(pts, 0.1, false) == 0.0);
  CHECK(triplet_loss<double>(pts, 0.1, true) > 0.0);
}

TEST_CASE("degenerate batches are rejected") {
  JointPoints<double> one;
  add_point(one, "q0", "a", {1, 0}, {1, 0});
  CHECK_THROWS_AS((void)triplet_loss<double>(one, 0.1, false), DataError);

  JointPoints<double> two;
  add_point(two, "q0", "a", {1, 0}, {1, 0});
  add_point(two, "q1", "b", {0, 1}, {0, 1});
  CHECK_THROWS_AS((void)triplet_loss<double>(two, -0.1, false), DataError);
}

TEST_CASE("the batch forward matches the stages composed by hand") {
  const PipelineFixture fx = make_pipeline_fixture(41);
  const std::vector<BatchPair> batch = fx.pairs();
  const BatchForwardResult<double> got =
      batch_forward<double>(fx.model, batch, fx.margin, 0.0, nullptr, false);

  JointPoints<double> pts;
  for (const BatchPair& pair : batch) {
    const std::vector<double> w = embed_sentence(fx.model, pair.tokens);
    const std::vector<double> f =
        text_guided_feature(fx.model, *pair.video, w, true, 0.0, nullptr);
    add_point(pts, pair.query_id, pair.video->video_id, joint_project(fx.model.Wv, f),
              joint_project(fx.model.Wt, w));
  }
  CHECK(got.loss == triplet_loss<double>(pts, fx.margin, false));
  CHECK(got.points.vp == pts.vp);
  CHECK(got.points.tp == pts.tp);
}

TEST_CASE("four-pair batch gradients match finite differences") {
  const PipelineFixture fx = make_pipeline_fixture(51, 4);
  const std::vector<BatchPair> batch = fx.pairs();
  const double margin = fx.margin;
  const auto probe = [&](const Model<double>& mm) {
    return batch_forward<double>(mm, batch, margin, 0.0, nullptr, false).loss;
  };
  Model<double> fxm = fx.model;
  Model<double> analytic(fx.dims);
  (void)batch_forward<double>(fxm, batch, margin, 0.0, nullptr, false, &analytic);
  const GradCheckReport report = grad_check(probe, fxm, analytic, 1e-5, 1e-4, 200, 52);
  CHECK(report.pass);
  CHECK(report.tensors.size() == 14);
}

TEST_CASE("a small step along the gradient never raises the loss") {
  for (uint64_t seed = 61; seed < 81; ++seed) {
    const PipelineFixture fx = make_pipeline_fixture(seed);
    const std::vector<BatchPair> batch = fx.pairs();
    Model<double> m = fx.model;
    Model<double> grads(fx.dims);
    const double before = batch_forward<double>(m, batch, fx.margin, 0.0, nullptr, false, &grads).loss;

    m.for_each([&](const char* name, Tensor<double>& t) {
      const Tensor<double>* g = grads.find(name);
      for (size_t i = 0; i < t.size(); ++i) t.data[i] -= 1e-6 * g->data[i];
    });
    const double after = batch_forward<double>(m, batch, fx.margin, 0.0, nullptr, false).loss;
    CHECK(after <= before + 1e-12);
  }
}
