#include "test_util.hpp"

using namespace ledcnet;
using test_util::grad_check;
using test_util::max_abs_diff;
using test_util::naive_conv2d;
using test_util::randn;
using test_util::weighted_sum;

namespace {

int64_t backbone_param_count(Backbone<double>& bb) {
  ParamList<double> params;
  bb.collect_params("backbone", params);
  int64_t total = 0;
  for (const auto& p : params) total += p.var->value.numel();
  return total;
}

int64_t count_blocks(Backbone<double>& bb) {
  ParamList<double> params;
  bb.collect_params("backbone", params);
  std::set<std::string> blocks;
  for (const auto& p : params) {
    const auto pos = p.name.find(".block");
    if (pos == std::string::npos) continue;
    blocks.insert(p.name.substr(0, p.name.find('.', pos + 1)));
  }
  return static_cast<int64_t>(blocks.size());
}

BackboneConfig tiny_config() {
  BackboneConfig cfg;
  cfg.stage_depths = {1, 1, 1, 1};
  cfg.stage_widths = {8, 12, 16, 20};
  cfg.stem_width = 8;
  cfg.growth = 8;
  cfg.bottleneck_expansion = 1;
  return cfg;
}

}  // namespace

TEST_CASE("base and large presets stack 12 and 36 dense blocks") {
  RandomSource rng(1);
  Backbone<double> base(ModelConfig::preset_base().backbone, rng);
  CHECK(count_blocks(base) == 12);
  Backbone<double> large(ModelConfig::preset_large().backbone, rng);
  CHECK(count_blocks(large) == 36);
}

TEST_CASE("config validation rejects bad fields") {
  BackboneConfig cfg = tiny_config();
  cfg.stage_depths[2] = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.stage_widths[1] = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.stem_width = 4;  // must equal stage_widths[0]
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(ModelConfig::preset_base().backbone.stage_depths == std::array<int64_t, 4>{2, 2, 6, 2});
}

TEST_CASE("unit-width backbone parameter count matches the layer-by-layer sum") {
  BackboneConfig cfg;
  cfg.stage_depths = {1, 1, 1, 1};
  cfg.stage_widths = {1, 1, 1, 1};
  cfg.stem_width = 1;
  cfg.growth = 1;
  cfg.bottleneck_expansion = 1;
  RandomSource rng(2);
  Backbone<double> bb(cfg, rng);

  // independent enumeration: stem conv 4*4*3*1+1 and LN 2; per block dw7
  // 49+1, pw7 1+1, dw3 9+1, pw3 1+1, LN 2, fuse 1+1; per transition (input
  // width 2) LN 4 and projection 2*1+1.
  const int64_t stem = 4 * 4 * 3 * 1 + 1 + 2;
  const int64_t block = (49 + 1) + (1 + 1) + (9 + 1) + (1 + 1) + 2 + (1 + 1);
  const int64_t transition = 2 * 2 + (2 * 1 + 1);
  CHECK(backbone_param_count(bb) == stem + 4 * block + 3 * transition);
}

TEST_CASE("forward emits strides 4/8/16/32 with the documented channel counts") {
  BackboneConfig cfg = tiny_config();
  RandomSource rng(3);
  Backbone<double> bb(cfg, rng);
  auto x = make_leaf(randn({2, 3, 64, 64}, rng));
  auto feats = bb.forward(x);
  const int64_t spatial[4] = {16, 8, 4, 2};
  const int64_t strides[4] = {4, 8, 16, 32};
  for (int i = 0; i < 4; ++i) {
    CHECK(feats[static_cast<size_t>(i)].stride == strides[i]);
    CHECK(feats[static_cast<size_t>(i)].data->value.dim(1) == cfg.stage_out_channels(i));
    CHECK(feats[static_cast<size_t>(i)].data->value.dim(2) == spatial[i]);
    CHECK(feats[static_cast<size_t>(i)].data->value.dim(3) == spatial[i]);
  }

  auto x32 = make_leaf(randn({2, 3, 32, 32}, rng));
  auto f32 = bb.forward(x32);
  CHECK(f32[0].data->value.dim(2) == 8);
  CHECK(f32[1].data->value.dim(2) == 4);
  CHECK(f32[2].data->value.dim(2) == 2);
  CHECK(f32[3].data->value.dim(2) == 1);
}

TEST_CASE("forward rejects sizes that are not multiples of 32, naming the axis") {
  RandomSource rng(4);
  Backbone<double> bb(tiny_config(), rng);
  auto bad_h = make_leaf(randn({1, 3, 48, 64}, rng));
  CHECK_THROWS_WITH(bb.forward(bad_h), Catch::Matchers::ContainsSubstring("height"));
  auto bad_w = make_leaf(randn({1, 3, 64, 20}, rng));
  CHECK_THROWS_WITH(bb.forward(bad_w), Catch::Matchers::ContainsSubstring("width"));
  CHECK_NOTHROW(bb.forward(make_leaf(randn({1, 3, 16, 16}, rng)), /*relax=*/true));
}

TEST_CASE("zeroed parameters map zero input to zero features") {
  RandomSource rng(5);
  Backbone<double> bb(tiny_config(), rng);
  ParamList<double> params;
  bb.collect_params("backbone", params);
  for (auto& p : params) p.var->value.fill(0.0);
  auto feats = bb.forward(make_leaf(Tensor<double>({1, 3, 32, 32})));
  for (const auto& f : feats) {
    double mx = 0;
    for (int64_t i = 0; i < f.data->value.numel(); ++i)
      mx = std::max(mx, std::abs(f.data->value[i]));
    CHECK(mx == 0.0);
  }
}

TEST_CASE("dense bottleneck grows channels and passes the input through untouched") {
  RandomSource rng(6);
  DenseBottleneck<double> block(8, 4, 2, rng);
  auto x = make_leaf(randn({1, 8, 16, 16}, rng));
  Var<double> y = block.forward(x);
  CHECK(y->value.shape() == Shape{1, 12, 16, 16});
  // first in_channels channels are bitwise the input
  for (int64_t c = 0; c < 8; ++c)
    for (int64_t s = 0; s < 256; ++s)
      CHECK(y->value[(0 * 12 + c) * 256 + s] == x->value[(0 * 8 + c) * 256 + s]);
  auto bad = make_leaf(randn({1, 5, 16, 16}, rng));
  CHECK_THROWS_AS(block.forward(bad), ShapeError);
}

TEST_CASE("bottleneck with branch_b zeroed equals the hand-computed branch_a path") {
  RandomSource rng(7);
  const int64_t cin = 4, growth = 3, expansion = 2, mid = expansion * growth;
  DenseBottleneck<double> block(cin, growth, expansion, rng);
  ParamList<double> params;
  block.collect_params("blk", params);
  std::map<std::string, Var<double>> by_name;
  for (auto& p : params) by_name[p.name] = p.var;
  by_name["blk.dw3.weight"]->value.fill(0.0);
  by_name["blk.dw3.bias"]->value.fill(0.0);
  by_name["blk.pw3.weight"]->value.fill(0.0);
  by_name["blk.pw3.bias"]->value.fill(0.0);

  Tensor<double> x = randn({1, cin, 6, 6}, rng);
  Var<double> got = block.forward(make_leaf(x));

  // oracle: concat(x, gelu(fuse(LN(pw7(dw7(x)))))) computed with naive ops
  Conv2dSpec dw_spec;
  dw_spec.kh = dw_spec.kw = 7;
  dw_spec.ph = dw_spec.pw = 3;
  dw_spec.groups = cin;
  Tensor<double> a = naive_conv2d(x, by_name["blk.dw7.weight"]->value,
                                  &by_name["blk.dw7.bias"]->value, dw_spec);
  Conv2dSpec pw_spec;
  Tensor<double> m = naive_conv2d(a, by_name["blk.pw7.weight"]->value,
                                  &by_name["blk.pw7.bias"]->value, pw_spec);
  // layer norm over channels at each location
  const Tensor<double>& gamma = by_name["blk.norm.gamma"]->value;
  const Tensor<double>& beta = by_name["blk.norm.beta"]->value;
  Tensor<double> normed(m.shape());
  for (int64_t s = 0; s < 36; ++s) {
    double mu = 0;
    for (int64_t c = 0; c < mid; ++c) mu += m[c * 36 + s];
    mu /= static_cast<double>(mid);
    double var = 0;
    for (int64_t c = 0; c < mid; ++c) {
      const double d = m[c * 36 + s] - mu;
      var += d * d;
    }
    var /= static_cast<double>(mid);
    for (int64_t c = 0; c < mid; ++c)
      normed[c * 36 + s] = gamma[c] * (m[c * 36 + s] - mu) / std::sqrt(var + 1e-6) + beta[c];
  }
  Tensor<double> fused = naive_conv2d(normed, by_name["blk.fuse.weight"]->value,
                                      &by_name["blk.fuse.bias"]->value, pw_spec);
  for (int64_t i = 0; i < fused.numel(); ++i)
    fused[i] = fused[i] * 0.5 * (1.0 + std::erf(fused[i] * 0.7071067811865475244));

  for (int64_t c = 0; c < cin + growth; ++c)
    for (int64_t s = 0; s < 36; ++s) {
      const double want = c < cin ? x[c * 36 + s] : fused[(c - cin) * 36 + s];
      CHECK(got->value[c * 36 + s] == Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("parameter count is strictly monotone in every stage depth") {
  RandomSource rng(8);
  BackboneConfig base = tiny_config();
  Backbone<double> bb(base, rng);
  const int64_t base_count = backbone_param_count(bb);
  for (size_t i = 0; i < 4; ++i) {
    BackboneConfig deeper = base;
    deeper.stage_depths[i] += 1;
    Backbone<double> bb2(deeper, rng);
    CHECK(backbone_param_count(bb2) > base_count);
  }
}

TEST_CASE("random configurations keep the stride and channel contracts") {
  RandomSource rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    BackboneConfig cfg;
    const int64_t w0 = 4 + 4 * static_cast<int64_t>(rng.below(3));
    cfg.stem_width = w0;
    cfg.stage_widths = {w0, w0 + 4, w0 + 8, w0 + 12};
    for (auto& d : cfg.stage_depths) d = 1 + static_cast<int64_t>(rng.below(3));
    cfg.growth = 4 + 4 * static_cast<int64_t>(rng.below(2));
    cfg.bottleneck_expansion = 1 + static_cast<int64_t>(rng.below(2));
    Backbone<double> bb(cfg, rng);
    const int64_t side = 32 * (1 + static_cast<int64_t>(rng.below(2)));
    auto feats = bb.forward(make_leaf(randn({1, 3, side, side}, rng, 0.3)));
    const int64_t strides[4] = {4, 8, 16, 32};
    for (int i = 0; i < 4; ++i) {
      REQUIRE(feats[static_cast<size_t>(i)].stride == strides[i]);
      REQUIRE(feats[static_cast<size_t>(i)].data->value.dim(1) == cfg.stage_out_channels(i));
      REQUIRE(feats[static_cast<size_t>(i)].data->value.dim(2) == side / strides[i]);
      REQUIRE(feats[static_cast<size_t>(i)].data->value.all_finite());
    }
  }
}

TEST_CASE("gradient health: analytic gradients match central differences on 8x8") {
  RandomSource rng(9);
  Backbone<double> bb(tiny_config(), rng);
  ParamList<double> params;
  bb.collect_params("backbone", params);
  const Tensor<double> input = randn({1, 3, 8, 8}, rng);
  std::vector<Tensor<double>> proj;
  auto build = [&] {
    auto feats = bb.forward(make_leaf(input), /*relax=*/true);
    if (proj.empty())
      for (const auto& f : feats) {
        RandomSource r2(99);
        proj.push_back(randn(f.data->value.shape(), r2));
      }
    Var<double> loss = weighted_sum(feats[0].data, proj[0]);
    for (size_t i = 1; i < 4; ++i) loss = add(loss, weighted_sum(feats[i].data, proj[i]));
    return loss;
  };
  auto res = grad_check(build, params, rng, 120);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-3);
  CHECK(res.checked == 120);
}
