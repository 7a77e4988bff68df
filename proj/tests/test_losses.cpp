#include "test_util.hpp"

using namespace ledcnet;
using test_util::grad_check;
using test_util::randn;

namespace {

Tensor<int32_t> targets_of(const Shape& shape, std::vector<int32_t> v) {
  return Tensor<int32_t>(shape, std::move(v));
}

/// Independent mean cross-entropy for the gamma = 0, alpha = 1 degeneracy.
double mean_cross_entropy(const Tensor<double>& logits, const Tensor<int32_t>& targets) {
  const int64_t n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  double total = 0;
  for (int64_t b = 0; b < n; ++b)
    for (int64_t s = 0; s < plane; ++s) {
      double mx = -1e300, z = 0;
      for (int64_t ch = 0; ch < c; ++ch) mx = std::max(mx, logits[(b * c + ch) * plane + s]);
      for (int64_t ch = 0; ch < c; ++ch) z += std::exp(logits[(b * c + ch) * plane + s] - mx);
      const int32_t t = targets[b * plane + s];
      total += -(logits[(b * c + t) * plane + s] - mx - std::log(z));
    }
  return total / static_cast<double>(n * plane);
}

}  // namespace

TEST_CASE("focal params validation") {
  CHECK_THROWS_AS((FocalParams{-0.5, 0.25}).validate(), ParameterError);
  CHECK_THROWS_AS((FocalParams{2.0, 0.0}).validate(), ParameterError);
  CHECK_THROWS_AS((FocalParams{2.0, 1.5}).validate(), ParameterError);
  CHECK_NOTHROW((FocalParams{0.0, 1.0}).validate());
  CHECK_NOTHROW((FocalParams{2.0, 0.25}).validate());
}

TEST_CASE("certain prediction costs nothing") {
  // logits so one-sided that p_t saturates: the analytic loss at p_t = 1 is 0
  Tensor<double> logits({1, 2, 1, 1}, std::vector<double>{60.0, -60.0});
  auto l = focal_loss(make_leaf(logits), targets_of({1, 1, 1}, {0}), {2.0, 0.25});
  CHECK(std::abs(l->value[0]) < 1e-10);
}

TEST_CASE("gamma 0, alpha 1 reduces to mean cross-entropy exactly") {
  RandomSource rng(1);
  Tensor<double> logits = randn({2, 3, 4, 4}, rng, 2.0);
  std::vector<int32_t> t(2 * 16);
  for (auto& v : t) v = static_cast<int32_t>(rng.below(3));
  Tensor<int32_t> targets({2, 4, 4}, std::move(t));
  auto l = focal_loss(make_leaf(logits), targets, {0.0, 1.0});
  CHECK(l->value[0] == Catch::Approx(mean_cross_entropy(logits, targets)).epsilon(1e-12));
}

TEST_CASE("hand-evaluated focal value at p=0.5, gamma=2, alpha=0.25") {
  // two equal logits make p_t exactly 0.5
  Tensor<double> logits({1, 2, 1, 1}, std::vector<double>{1.3, 1.3});
  auto l = focal_loss(make_leaf(logits), targets_of({1, 1, 1}, {0}), {2.0, 0.25});
  CHECK(std::abs(l->value[0] - 0.043322) < 1e-6);
  CHECK(l->value[0] == Catch::Approx(0.25 * 0.25 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("out-of-range targets name the offending pixel") {
  RandomSource rng(2);
  Tensor<double> logits = randn({1, 3, 2, 3}, rng);
  Tensor<int32_t> targets({1, 2, 3});
  targets.at(0, 1, 2) = 7;
  CHECK_THROWS_WITH(focal_loss(make_leaf(logits), targets, {2.0, 0.25}),
                    Catch::Matchers::ContainsSubstring("y=1") &&
                        Catch::Matchers::ContainsSubstring("x=2"));
}

TEST_CASE("ignored pixels do not contribute") {
  Tensor<double> logits({1, 2, 1, 2}, std::vector<double>{1.3, 5.0, 1.3, -5.0});
  Tensor<int32_t> targets({1, 1, 2}, std::vector<int32_t>{0, 255});
  auto l = focal_loss(make_leaf(logits), targets, {2.0, 0.25}, 255);
  CHECK(l->value[0] == Catch::Approx(0.25 * 0.25 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("an all-ignored batch scores zero loss and zero gradients") {
  RandomSource rng(9);
  auto logits = make_param(randn({1, 3, 2, 2}, rng));
  Tensor<int32_t> targets = Tensor<int32_t>::full({1, 2, 2}, 255);
  auto l = focal_loss(logits, targets, {2.0, 0.25}, 255);
  CHECK(l->value[0] == 0.0);
  backward(l);
  if (!logits->grad.empty())
    for (int64_t i = 0; i < logits->grad.numel(); ++i) CHECK(logits->grad[i] == 0.0);
}

TEST_CASE("loss is finite and non-negative for extreme finite logits") {
  RandomSource rng(3);
  for (double scale : {1.0, 50.0, 1000.0}) {
    Tensor<double> logits = randn({1, 3, 3, 3}, rng, scale);
    std::vector<int32_t> t(9);
    for (auto& v : t) v = static_cast<int32_t>(rng.below(3));
    auto l = focal_loss(make_leaf(logits), Tensor<int32_t>({1, 3, 3}, std::move(t)),
                        {2.0, 0.25});
    CHECK(std::isfinite(l->value[0]));
    CHECK(l->value[0] >= 0.0);
  }
}

TEST_CASE("single-pixel loss strictly decreases as the target logit grows") {
  double prev = 1e300;
  for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0, 4.0}) {
    Tensor<double> logits({1, 2, 1, 1}, std::vector<double>{v, 0.5});
    auto l = focal_loss(make_leaf(logits), targets_of({1, 1, 1}, {0}), {2.0, 0.25});
    CHECK(l->value[0] < prev);
    prev = l->value[0];
  }
}

TEST_CASE("gamma ordering: focusing never increases the loss") {
  RandomSource rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor<double> logits = randn({1, 3, 2, 2}, rng, 2.0);
    std::vector<int32_t> t(4);
    for (auto& v : t) v = static_cast<int32_t>(rng.below(3));
    Tensor<int32_t> targets({1, 2, 2}, std::move(t));
    auto g2 = focal_loss(make_leaf(logits), targets, {2.0, 0.25});
    auto g0 = focal_loss(make_leaf(logits), targets, {0.0, 0.25});
    CHECK(g2->value[0] <= g0->value[0]);
  }
}

TEST_CASE("focal gradient matches central differences on a 2x2x3 case") {
  RandomSource rng(5);
  auto logits = make_param(randn({1, 3, 2, 2}, rng, 1.5));
  std::vector<int32_t> t(4);
  for (auto& v : t) v = static_cast<int32_t>(rng.below(3));
  Tensor<int32_t> targets({1, 2, 2}, std::move(t));
  auto build = [&] { return focal_loss(logits, targets, {2.0, 0.25}); };
  auto res = grad_check(build, {{"logits", logits}}, rng, 12, 1e-6);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("combined loss composition") {
  RandomSource rng(6);
  auto refined = make_leaf(randn({1, 3, 4, 4}, rng));
  auto coarse = make_leaf(randn({1, 3, 4, 4}, rng));
  std::vector<int32_t> t(16);
  for (auto& v : t) v = static_cast<int32_t>(rng.below(3));
  Tensor<int32_t> targets({1, 4, 4}, std::move(t));
  const FocalParams fp{2.0, 0.25};

  auto main_only = combined_loss(refined, coarse, targets, fp, 0.0);
  CHECK(main_only->value[0] ==
        Catch::Approx(focal_loss(refined, targets, fp)->value[0]).epsilon(1e-15));

  auto doubled = combined_loss(refined, refined, targets, fp, 1.0);
  CHECK(doubled->value[0] ==
        Catch::Approx(2.0 * focal_loss(refined, targets, fp)->value[0]).epsilon(1e-12));

  auto mixed = combined_loss(refined, coarse, targets, fp, 0.4);
  const double want = focal_loss(refined, targets, fp)->value[0] +
                      0.4 * focal_loss(coarse, targets, fp)->value[0];
  CHECK(std::abs(mixed->value[0] - want) < 1e-6);

  CHECK_THROWS_AS(combined_loss(refined, coarse, targets, fp, -0.1), ParameterError);
}
