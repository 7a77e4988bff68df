#include "test_util.hpp"

using namespace ledcnet;
using test_util::grad_check;
using test_util::max_abs_diff;
using test_util::naive_conv2d;
using test_util::randn;
using test_util::toy_model_config;
using test_util::weighted_sum;

TEST_CASE("aspp keeps spatial size and emits out_channels") {
  RandomSource rng(1);
  ASPPConfig cfg;
  cfg.dilation_rates = {6, 12, 18};
  cfg.out_channels = 64;
  AsppModule<double> aspp(64, cfg, rng);
  aspp.set_training(true);
  auto x = make_leaf(randn({1, 64, 32, 32}, rng));
  Var<double> y = aspp.forward(x);
  CHECK(y->value.shape() == Shape{1, 64, 32, 32});
  CHECK(y->value.all_finite());
}

TEST_CASE("aspp config validation") {
  ASPPConfig cfg;
  cfg.dilation_rates = {};
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.dilation_rates = {6, 6};
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.dilation_rates = {1};  // rate 1 is allowed and degenerates to a plain conv
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("aspp with rates [1] and no pooling is a two-branch fuse") {
  RandomSource rng(2);
  ASPPConfig cfg;
  cfg.dilation_rates = {1};
  cfg.out_channels = 8;
  cfg.include_global_pool_branch = false;
  AsppModule<double> aspp(6, cfg, rng);
  ParamList<double> params;
  aspp.collect_params("aspp", params);
  std::set<std::string> groups;
  for (const auto& p : params) groups.insert(p.name.substr(0, p.name.find('.', 5)));
  CHECK(groups == std::set<std::string>{"aspp.branch1x1", "aspp.rate1", "aspp.fuse"});
  auto x = make_leaf(randn({2, 6, 9, 9}, rng));
  CHECK(aspp.forward(x)->value.shape() == Shape{2, 8, 9, 9});
}

TEST_CASE("dilated branches on a constant map match brute-force evaluation on a 5x5 grid") {
  // y[i] = sum_k x[i + r*k] w[k]: on a constant field the interior output is
  // constant; near the border the zero padding drops taps. The brute force
  // recomputes every position from the formula.
  RandomSource rng(3);
  const int64_t r = 2;
  Tensor<double> x = Tensor<double>::full({1, 1, 5, 5}, 1.7);
  Tensor<double> w = randn({1, 1, 3, 3}, rng);
  Conv2dSpec s;
  s.kh = s.kw = 3;
  s.dh = s.dw = r;
  s.ph = s.pw = r;
  Tensor<double> y = conv2d_forward<double>(x, w, nullptr, s);
  for (int64_t oy = 0; oy < 5; ++oy)
    for (int64_t ox = 0; ox < 5; ++ox) {
      double acc = 0;
      for (int64_t ky = 0; ky < 3; ++ky)
        for (int64_t kx = 0; kx < 3; ++kx) {
          const int64_t iy = oy - r + ky * r, ix = ox - r + kx * r;
          if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
          acc += 1.7 * w.at(0, 0, ky, kx);
        }
      CHECK(y.at(0, 0, oy, ox) == Catch::Approx(acc).margin(1e-12));
    }
  // interior (full kernel support) is exactly constant
  CHECK(y.at(0, 0, 2, 2) == Catch::Approx(1.7 * [&] {
          double t = 0;
          for (int64_t i = 0; i < 9; ++i) t += w[i];
          return t;
        }()).margin(1e-12));
}

TEST_CASE("fpn_fuse projects, upsamples and concatenates four levels") {
  RandomSource rng(4);
  FpnFuse<double> fpn({10, 12, 14, 16}, 48, rng);
  std::vector<Var<double>> feats = {
      make_leaf(randn({2, 10, 16, 16}, rng)), make_leaf(randn({2, 12, 8, 8}, rng)),
      make_leaf(randn({2, 14, 4, 4}, rng)), make_leaf(randn({2, 16, 2, 2}, rng))};
  Var<double> fused = fpn.forward(feats);
  CHECK(fused->value.shape() == Shape{2, 192, 16, 16});
}

TEST_CASE("fpn_fuse single level equals its lateral projection") {
  RandomSource rng(5);
  FpnFuse<double> fpn({7}, 5, rng);
  Tensor<double> x = randn({1, 7, 6, 6}, rng);
  Var<double> out = fpn.forward({make_leaf(x)});
  ParamList<double> params;
  fpn.collect_params("fpn", params);
  REQUIRE(params.size() == 2);  // weight + bias
  Tensor<double> want =
      naive_conv2d(x, params[0].var->value, &params[1].var->value, Conv2dSpec{});
  CHECK(max_abs_diff(out->value, want) < 1e-12);
}

TEST_CASE("fpn_fuse on constant maps stays channelwise constant across interpolation") {
  RandomSource rng(6);
  FpnFuse<double> fpn({3, 4}, 5, rng);
  std::vector<Var<double>> feats = {make_leaf(Tensor<double>::full({1, 3, 8, 8}, 0.4)),
                                    make_leaf(Tensor<double>::full({1, 4, 2, 2}, -1.1))};
  Var<double> fused = fpn.forward(feats);
  for (int64_t c = 0; c < fused->value.dim(1); ++c) {
    const double first = fused->value.at(0, c, 0, 0);
    for (int64_t s = 0; s < 64; ++s)
      CHECK(fused->value[(c)*64 + s] == Catch::Approx(first).margin(1e-12));
  }
}

TEST_CASE("fpn_fuse rejects mismatched batches and feature counts") {
  RandomSource rng(7);
  FpnFuse<double> fpn({3, 4, 5, 6}, 8, rng);
  std::vector<Var<double>> three = {make_leaf(randn({1, 3, 8, 8}, rng)),
                                    make_leaf(randn({1, 4, 4, 4}, rng)),
                                    make_leaf(randn({1, 5, 2, 2}, rng))};
  CHECK_THROWS_AS(fpn.forward(three), ShapeError);
  std::vector<Var<double>> mismatched = {make_leaf(randn({1, 3, 8, 8}, rng)),
                                         make_leaf(randn({2, 4, 4, 4}, rng)),
                                         make_leaf(randn({1, 5, 2, 2}, rng)),
                                         make_leaf(randn({1, 6, 1, 1}, rng))};
  CHECK_THROWS_AS(fpn.forward(mismatched), ShapeError);
}

TEST_CASE("soft object regions: uniform logits give the spatial mean features") {
  RandomSource rng(8);
  OCRConfig cfg;
  cfg.num_regions = 3;
  cfg.key_dim = 8;
  cfg.mid_channels = 6;
  cfg.context_channels = 4;
  cfg.augmented_channels = 5;
  OcrModule<double> ocr(cfg, rng);
  ParamList<double> params;
  ocr.collect_params("ocr", params);
  for (auto& p : params)
    if (p.name.rfind("ocr.region_head", 0) == 0) p.var->value.fill(0.0);
  Tensor<double> pix = randn({2, 6, 4, 4}, rng);
  auto [logits, reps] = ocr.soft_object_regions(make_leaf(pix));
  CHECK(reps.shape() == Shape{2, 3, 6});
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 6; ++c) {
      double mean = 0;
      for (int64_t s = 0; s < 16; ++s) mean += pix[(n * 6 + c) * 16 + s];
      mean /= 16;
      for (int64_t k = 0; k < 3; ++k)
        CHECK(reps.at(n, k, c) == Catch::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("soft object regions: a dominating pixel owns its region representation") {
  RandomSource rng(9);
  OCRConfig cfg;
  cfg.num_regions = 1;
  cfg.key_dim = 4;
  cfg.mid_channels = 3;
  cfg.context_channels = 3;
  cfg.augmented_channels = 3;
  OcrModule<double> ocr(cfg, rng);
  ParamList<double> params;
  ocr.collect_params("ocr", params);
  for (auto& p : params) {
    if (p.name == "ocr.region_head.weight") p.var->value.fill(1e4);
    if (p.name == "ocr.region_head.bias") p.var->value.fill(0.0);
  }
  // one spatial position carries a large positive feature; its logit dominates
  Tensor<double> pix({1, 3, 2, 2});
  pix.at(0, 0, 1, 1) = 1.0;
  pix.at(0, 1, 1, 1) = 0.5;
  pix.at(0, 2, 1, 1) = -0.25;
  auto [logits, reps] = ocr.soft_object_regions(make_leaf(pix));
  CHECK(std::abs(reps.at(0, 0, 0) - 1.0) < 1e-4);
  CHECK(std::abs(reps.at(0, 0, 1) - 0.5) < 1e-4);
  CHECK(std::abs(reps.at(0, 0, 2) + 0.25) < 1e-4);
}

TEST_CASE("ocr pixel-region weights match brute-force softmax of phi^T psi") {
  RandomSource rng(10);
  OCRConfig cfg;
  cfg.num_regions = 3;
  cfg.key_dim = 5;
  cfg.mid_channels = 7;
  cfg.context_channels = 6;
  cfg.augmented_channels = 8;
  OcrModule<double> ocr(cfg, rng);
  ocr.set_capture(true);
  Tensor<double> pix = randn({2, 7, 2, 2}, rng);
  OcrOutput<double> out = ocr.forward(make_leaf(pix));
  CHECK(out.augmented->value.shape() == Shape{2, 8, 2, 2});
  CHECK(out.region_logits->value.shape() == Shape{2, 3, 2, 2});

  const Tensor<double>& phi = ocr.captured_queries();  // (2, 5, 2, 2)
  const Tensor<double>& psi = ocr.captured_keys();     // (2, 5, 3, 1)
  const Tensor<double>& w = ocr.captured_weights();    // (2, 4, 3)
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t i = 0; i < 4; ++i) {
      double z = 0;
      std::vector<double> e(3);
      for (int64_t k = 0; k < 3; ++k) {
        double kappa = 0;
        for (int64_t d = 0; d < 5; ++d)
          kappa += phi[(n * 5 + d) * 4 + i] * psi[(n * 5 + d) * 3 + k];
        e[static_cast<size_t>(k)] = std::exp(kappa);
        z += e[static_cast<size_t>(k)];
      }
      double row_sum = 0;
      for (int64_t k = 0; k < 3; ++k) {
        CHECK(std::abs(w.at(n, i, k) - e[static_cast<size_t>(k)] / z) < 1e-6);
        row_sum += w.at(n, i, k);
      }
      CHECK(std::abs(row_sum - 1.0) < 1e-6);
    }
}

TEST_CASE("ocr with a single region weights everything at one") {
  RandomSource rng(11);
  OCRConfig cfg;
  cfg.num_regions = 1;
  cfg.key_dim = 4;
  cfg.mid_channels = 5;
  cfg.context_channels = 4;
  cfg.augmented_channels = 6;
  OcrModule<double> ocr(cfg, rng);
  ocr.set_capture(true);
  ocr.forward(make_leaf(randn({1, 5, 3, 3}, rng)));
  const Tensor<double>& w = ocr.captured_weights();
  for (int64_t i = 0; i < w.numel(); ++i) CHECK(w[i] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("region count must equal the class count at the model level") {
  ModelConfig cfg = toy_model_config();
  cfg.ocr.num_regions = 2;  // classes stay at 3
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("scaled_dot_attention rejects mismatched key/query depth") {
  RandomSource rng(30);
  Tensor<double> q = randn({3, 2}, rng);
  Tensor<double> k = randn({4, 2}, rng);
  Tensor<double> v = randn({2, 2}, rng);
  CHECK_THROWS_AS(scaled_dot_attention(q, k, v), ShapeError);
  Tensor<double> k2 = randn({3, 5}, rng);
  CHECK_THROWS_AS(scaled_dot_attention(q, k2, v), ShapeError);
}

TEST_CASE("ocr rejects pixel features whose width is not mid_channels") {
  RandomSource rng(12);
  OCRConfig cfg;
  cfg.num_regions = 2;
  cfg.key_dim = 4;
  cfg.mid_channels = 5;
  cfg.context_channels = 4;
  cfg.augmented_channels = 6;
  OcrModule<double> ocr(cfg, rng);
  CHECK_THROWS_AS(ocr.forward(make_leaf(randn({1, 4, 3, 3}, rng))), ShapeError);
}

TEST_CASE("softmax shift invariance: a constant added to every score row is absorbed") {
  RandomSource rng(13);
  const int64_t d = 3, nq = 4, nkv = 5, c = 2;
  Tensor<double> q = randn({d, nq}, rng);
  Tensor<double> k = randn({d, nkv}, rng);
  Tensor<double> v = randn({c, nkv}, rng);
  // append one query/key dimension contributing a constant c0 to every score
  const double c0 = 7.5;
  Tensor<double> q2({d + 1, nq}), k2({d + 1, nkv});
  for (int64_t i = 0; i < nq; ++i) {
    for (int64_t t = 0; t < d; ++t) q2.at(t, i) = q.at(t, i);
    q2.at(d, i) = 1.0;
  }
  for (int64_t j = 0; j < nkv; ++j) {
    for (int64_t t = 0; t < d; ++t) k2.at(t, j) = k.at(t, j);
    k2.at(d, j) = c0;
  }
  // rescale so both runs use the same softmax temperature on the shared part
  Tensor<double> w1, w2;
  {
    NoGradGuard ng;
    auto qa = make_leaf(q.reshaped({1, d, nq, 1}));
    auto ka = make_leaf(k.reshaped({1, d, nkv, 1}));
    auto va = make_leaf(v.reshaped({1, c, nkv, 1}));
    auto wp = std::make_shared<Tensor<double>>();
    softmax_attention(qa, ka, va, 1.0, wp);
    w1 = *wp;
    auto qb = make_leaf(q2.reshaped({1, d + 1, nq, 1}));
    auto kb = make_leaf(k2.reshaped({1, d + 1, nkv, 1}));
    auto wq = std::make_shared<Tensor<double>>();
    softmax_attention(qb, kb, va, 1.0, wq);
    w2 = *wq;
  }
  CHECK(max_abs_diff(w1, w2) < 1e-6);
}

TEST_CASE("decode produces coarse and refined logits at input size") {
  RandomSource rng(14);
  Ledcnet<double> model(toy_model_config(), 5);
  model.set_training(true);
  auto out = model.forward(make_leaf(randn({2, 3, 64, 64}, rng, 0.5)));
  CHECK(out.coarse_logits->value.shape() == Shape{2, 3, 64, 64});
  CHECK(out.refined_logits->value.shape() == Shape{2, 3, 64, 64});
  CHECK(out.coarse_logits->value.all_finite());
  CHECK(out.refined_logits->value.all_finite());
}

TEST_CASE("the four ablation graphs are distinct and OCR-off aliases coarse to refined") {
  RandomSource rng(15);
  std::array<std::pair<bool, bool>, 4> toggles{{{false, false}, {true, false}, {false, true},
                                                {true, true}}};
  std::vector<int64_t> params;
  for (auto [use_aspp, use_ocr] : toggles) {
    Ledcnet<double> model(toy_model_config(use_aspp, use_ocr), 5);
    int64_t count = 0;
    for (const auto& p : model.named_params()) count += p.var->value.numel();
    params.push_back(count);
    auto out = model.forward(make_leaf(randn({1, 3, 32, 32}, rng, 0.5)));
    if (!use_ocr)
      CHECK(out.coarse_logits.get() == out.refined_logits.get());
    else
      CHECK(out.coarse_logits.get() != out.refined_logits.get());
  }
  std::set<int64_t> distinct(params.begin(), params.end());
  CHECK(distinct.size() == 4);
  CHECK(params[3] > params[0]);  // full config strictly exceeds the baseline
}

TEST_CASE("ablation toggles change the parameter name inventory") {
  Ledcnet<double> base(toy_model_config(false, false), 1);
  Ledcnet<double> full(toy_model_config(true, true), 1);
  std::set<std::string> base_names, full_names;
  for (const auto& p : base.named_params()) base_names.insert(p.name);
  for (const auto& p : full.named_params()) full_names.insert(p.name);
  CHECK(base_names.count("ocr.fuse.conv.weight") == 0);
  CHECK(full_names.count("ocr.fuse.conv.weight") == 1);
  CHECK(base_names.count("aspp1.fuse.conv.weight") == 0);
  CHECK(full_names.count("aspp1.fuse.conv.weight") == 1);
}

TEST_CASE("refinement head maps features to class logits at four times the resolution") {
  RandomSource rng(16);
  RefineHead<double> head(12, 8, 3, rng);
  head.set_training(true);
  auto x = make_leaf(randn({1, 12, 8, 8}, rng));
  Var<double> y = head.forward(x, 32, 32);
  CHECK(y->value.shape() == Shape{1, 3, 32, 32});
  RefineHead<double> head1(12, 8, 1, rng);
  head1.set_training(true);
  CHECK(head1.forward(x, 32, 32)->value.dim(1) == 1);
}

TEST_CASE("refinement head with zero weights emits zero logits") {
  RandomSource rng(17);
  RefineHead<double> head(6, 4, 3, rng);
  ParamList<double> params;
  head.collect_params("head", params);
  for (auto& p : params)
    if (p.name.find("gamma") == std::string::npos) p.var->value.fill(0.0);
  head.set_training(true);
  Var<double> y = head.forward(make_leaf(randn({1, 6, 4, 4}, rng)), 16, 16);
  for (int64_t i = 0; i < y->value.numel(); ++i) CHECK(y->value[i] == 0.0);
}
