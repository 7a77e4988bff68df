#include "test_util.hpp"

using namespace ledcnet;

namespace {

/// Builds a confusion matrix from explicit (truth, prediction) cell counts.
ConfusionMatrix cm_from(const std::vector<std::vector<int64_t>>& counts) {
  const int64_t c = static_cast<int64_t>(counts.size());
  std::vector<int32_t> pred, truth;
  for (int64_t t = 0; t < c; ++t)
    for (int64_t p = 0; p < c; ++p)
      for (int64_t k = 0; k < counts[static_cast<size_t>(t)][static_cast<size_t>(p)]; ++k) {
        truth.push_back(static_cast<int32_t>(t));
        pred.push_back(static_cast<int32_t>(p));
      }
  const int64_t n = static_cast<int64_t>(pred.size());
  ConfusionMatrix cm(c);
  cm.update(Tensor<int32_t>({1, 1, n}, std::move(pred)),
            Tensor<int32_t>({1, 1, n}, std::move(truth)));
  return cm;
}

std::pair<Tensor<int32_t>, Tensor<int32_t>> random_pair(RandomSource& rng, int64_t classes,
                                                        int64_t side) {
  std::vector<int32_t> p(static_cast<size_t>(side * side)), t(p.size());
  for (auto& v : p) v = static_cast<int32_t>(rng.below(static_cast<uint64_t>(classes)));
  for (auto& v : t) v = static_cast<int32_t>(rng.below(static_cast<uint64_t>(classes)));
  return {Tensor<int32_t>({1, side, side}, std::move(p)),
          Tensor<int32_t>({1, side, side}, std::move(t))};
}

}  // namespace

TEST_CASE("perfect prediction fills only the diagonal") {
  RandomSource rng(1);
  auto [pred, truth] = random_pair(rng, 3, 8);
  ConfusionMatrix cm(3);
  cm.update(truth, truth);
  for (int64_t t = 0; t < 3; ++t)
    for (int64_t p = 0; p < 3; ++p)
      if (t != p) CHECK(cm.count(t, p) == 0);
  CHECK(cm.total() == 64);
  CHECK(cm.overall_accuracy() == 1.0);
  CHECK(cm.mean_iou() == 1.0);
}

TEST_CASE("a single misclassified pixel lands in the right cell") {
  ConfusionMatrix cm(2);
  cm.update(Tensor<int32_t>({1, 1, 1}, {1}), Tensor<int32_t>({1, 1, 1}, {0}));
  CHECK(cm.count(0, 1) == 1);
  CHECK(cm.total() == 1);
}

TEST_CASE("update matches a per-pixel counting oracle and honors ignore") {
  RandomSource rng(2);
  auto [pred, truth] = random_pair(rng, 3, 16);
  truth[5] = 255;
  truth[77] = 255;
  ConfusionMatrix cm(3);
  cm.update(pred, truth, 255);
  int64_t oracle[3][3] = {};
  for (int64_t i = 0; i < 256; ++i) {
    if (truth[i] == 255) continue;
    ++oracle[truth[i]][pred[i]];
  }
  for (int64_t t = 0; t < 3; ++t)
    for (int64_t p = 0; p < 3; ++p) CHECK(cm.count(t, p) == oracle[t][p]);
  CHECK(cm.total() == 254);
}

TEST_CASE("update rejects shape mismatches and bad labels") {
  ConfusionMatrix cm(3);
  CHECK_THROWS_AS(cm.update(Tensor<int32_t>({1, 2, 2}), Tensor<int32_t>({1, 2, 3})),
                  ShapeError);
  CHECK_THROWS_AS(cm.update(Tensor<int32_t>({1, 1, 1}, {9}), Tensor<int32_t>({1, 1, 1}, {0})),
                  DataError);
}

TEST_CASE("class_scores rejects an out-of-range class index") {
  ConfusionMatrix cm(3);
  CHECK_THROWS_AS(cm.class_scores(3), ParameterError);
  CHECK_THROWS_AS(cm.class_scores(-1), ParameterError);
  CHECK_THROWS_AS(cm.merge(ConfusionMatrix(2)), ShapeError);
}

TEST_CASE("overall accuracy hand cases") {
  CHECK(cm_from({{5, 0}, {0, 7}}).overall_accuracy() == 1.0);
  CHECK(cm_from({{1, 1}, {1, 1}}).overall_accuracy() == 0.5);
  CHECK(cm_from({{50, 10}, {5, 35}}).overall_accuracy() == Catch::Approx(0.85));
  CHECK_THROWS_AS(ConfusionMatrix(2).overall_accuracy(), UndefinedMetricError);
}

TEST_CASE("precision, recall, F1 and IoU hand cases") {
  // class 0: TP=8, FN=2 (truth 0 predicted 1), FP=2 (truth 1 predicted 0)
  ConfusionMatrix cm = cm_from({{8, 2}, {2, 88}});
  ClassScores s = cm.class_scores(0);
  CHECK(s.precision == Catch::Approx(0.8));
  CHECK(s.recall == Catch::Approx(0.8));
  CHECK(s.f1 == Catch::Approx(0.8));
  CHECK(s.iou == Catch::Approx(8.0 / 12.0).epsilon(1e-12));
  CHECK(s.defined);

  ConfusionMatrix perfect = cm_from({{10, 0}, {0, 3}});
  ClassScores ps = perfect.class_scores(1);
  CHECK(ps.precision == 1.0);
  CHECK(ps.recall == 1.0);
  CHECK(ps.f1 == 1.0);
}

TEST_CASE("a class absent from truth and prediction is flagged undefined") {
  ConfusionMatrix cm = cm_from({{4, 0, 0}, {0, 5, 0}, {0, 0, 0}});
  ClassScores s = cm.class_scores(2);
  CHECK_FALSE(s.defined);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);
  // include-as-zero (default) vs exclude
  CHECK(cm.mean_iou(false) == Catch::Approx(2.0 / 3.0));
  CHECK(cm.mean_iou(true) == Catch::Approx(1.0));
}

TEST_CASE("F1 equals 2 IoU / (1 + IoU) on random matrices") {
  RandomSource rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    auto [pred, truth] = random_pair(rng, 3, 16);
    ConfusionMatrix cm(3);
    cm.update(pred, truth);
    for (int64_t c = 0; c < 3; ++c) {
      ClassScores s = cm.class_scores(c);
      if (!s.defined) continue;
      CHECK(std::abs(s.f1 - 2.0 * s.iou / (1.0 + s.iou)) < 1e-12);
      CHECK(s.iou <= s.f1 + 1e-15);
      CHECK(s.f1 <= 1.0);
      CHECK(s.iou >= 0.0);
    }
  }
}

TEST_CASE("merging matrices equals counting jointly, in any order") {
  RandomSource rng(4);
  auto [p1, t1] = random_pair(rng, 3, 12);
  auto [p2, t2] = random_pair(rng, 3, 12);
  auto [p3, t3] = random_pair(rng, 3, 12);
  ConfusionMatrix a(3), b(3), c(3), joint(3);
  a.update(p1, t1);
  b.update(p2, t2);
  c.update(p3, t3);
  joint.update(p1, t1);
  joint.update(p2, t2);
  joint.update(p3, t3);

  ConfusionMatrix ab = a;
  ab.merge(b);
  ab.merge(c);
  ConfusionMatrix cb = c;
  cb.merge(b);
  cb.merge(a);
  for (int64_t t = 0; t < 3; ++t)
    for (int64_t p = 0; p < 3; ++p) {
      CHECK(ab.count(t, p) == joint.count(t, p));
      CHECK(cb.count(t, p) == joint.count(t, p));
    }
  CHECK(ab.mean_iou() == joint.mean_iou());
}

TEST_CASE("metrics are invariant under a joint relabeling of classes") {
  RandomSource rng(5);
  auto [pred, truth] = random_pair(rng, 3, 16);
  ConfusionMatrix cm(3);
  cm.update(pred, truth);
  const int32_t perm[3] = {2, 0, 1};
  Tensor<int32_t> pred_p = pred, truth_p = truth;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    pred_p[i] = perm[pred[i]];
    truth_p[i] = perm[truth[i]];
  }
  ConfusionMatrix cm_p(3);
  cm_p.update(pred_p, truth_p);
  CHECK(cm.overall_accuracy() == Catch::Approx(cm_p.overall_accuracy()).epsilon(1e-15));
  CHECK(cm.mean_f1() == Catch::Approx(cm_p.mean_f1()).epsilon(1e-12));
  CHECK(cm.mean_iou() == Catch::Approx(cm_p.mean_iou()).epsilon(1e-12));
}

TEST_CASE("report text uses two-decimal percentages") {
  ConfusionMatrix cm = cm_from({{8, 2}, {2, 88}});
  MetricReport r = MetricReport::from(cm, {"background", "house"});
  const std::string text = r.to_text();
  CHECK(text.find("iou.background = 66.67") != std::string::npos);
  CHECK(text.find("overall_accuracy = 96.00") != std::string::npos);
  CHECK(text.find("mean_f1 = ") != std::string::npos);
  CHECK(text.find("mean_iou = ") != std::string::npos);
}
