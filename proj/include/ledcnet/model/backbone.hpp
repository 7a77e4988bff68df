#pragma once

#include <array>
#include <string>
#include <vector>

#include "ledcnet/model/config.hpp"
#include "ledcnet/nn/layers.hpp"
#include "ledcnet/ops/pool_resize.hpp"
#include "ledcnet/ops/pointwise.hpp"

namespace ledcnet {

/// A feature map tagged with its stride relative to the network input.
template <typename T>
struct FeatureMap {
  Var<T> data;
  int64_t stride = 1;
};

/// Dual-branch dense bottleneck: 7x7 and 3x3 depthwise-separable branches are
/// summed, layer-normalized once, projected to `growth` channels and
/// concatenated onto the block input.
template <typename T>
class DenseBottleneck {
 public:
  DenseBottleneck() = default;
  DenseBottleneck(int64_t in_channels, int64_t growth, int64_t expansion, RandomSource& rng)
      : in_channels_(in_channels),
        growth_(growth),
        dw7_(in_channels, in_channels, 7, {.padding = 3, .groups = in_channels}, rng),
        pw7_(in_channels, expansion * growth, 1, {}, rng),
        dw3_(in_channels, in_channels, 3, {.padding = 1, .groups = in_channels}, rng),
        pw3_(in_channels, expansion * growth, 1, {}, rng),
        norm_(expansion * growth),
        fuse_(expansion * growth, growth, 1, {}, rng) {}

  Var<T> forward(const Var<T>& x) const {
    if (x->value.dim(1) != in_channels_)
      throw ShapeError("dense bottleneck: got " + std::to_string(x->value.dim(1)) +
                       " channels, block expects " + std::to_string(in_channels_));
    Var<T> a = pw7_.forward(dw7_.forward(x));
    Var<T> b = pw3_.forward(dw3_.forward(x));
    Var<T> grown = gelu(fuse_.forward(norm_.forward(add(a, b))));
    return concat_channels<T>({x, grown});
  }

  int64_t in_channels() const { return in_channels_; }
  int64_t out_channels() const { return in_channels_ + growth_; }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    dw7_.collect_params(prefix + ".dw7", out);
    pw7_.collect_params(prefix + ".pw7", out);
    dw3_.collect_params(prefix + ".dw3", out);
    pw3_.collect_params(prefix + ".pw3", out);
    norm_.collect_params(prefix + ".norm", out);
    fuse_.collect_params(prefix + ".fuse", out);
  }

 private:
  int64_t in_channels_ = 0;
  int64_t growth_ = 0;
  Conv2dLayer<T> dw7_, pw7_, dw3_, pw3_;
  LayerNormChannels<T> norm_;
  Conv2dLayer<T> fuse_;
};

/// Between-stage transition: LN -> 1x1 projection to the next stage width ->
/// 2x2 stride-2 average pooling.
template <typename T>
class Transition {
 public:
  Transition() = default;
  Transition(int64_t in_channels, int64_t out_channels, RandomSource& rng)
      : norm_(in_channels), proj_(in_channels, out_channels, 1, {}, rng) {}

  Var<T> forward(const Var<T>& x) const {
    return avg_pool2d(proj_.forward(norm_.forward(x)), 2);
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    norm_.collect_params(prefix + ".norm", out);
    proj_.collect_params(prefix + ".proj", out);
  }

 private:
  LayerNormChannels<T> norm_;
  Conv2dLayer<T> proj_;
};

/// LDCNet encoder: patchify stem, four densely connected stages, transitions
/// with LN in place of BN. Emits the end-of-stage features at strides
/// 4, 8, 16, 32.
template <typename T>
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& cfg, RandomSource& rng) : cfg_(cfg) {
    cfg.validate();
    stem_conv_ = Conv2dLayer<T>(3, cfg.stem_width, 4, {.stride = 4, .padding = 0}, rng);
    stem_norm_ = LayerNormChannels<T>(cfg.stem_width);
    for (int i = 0; i < 4; ++i) {
      std::vector<DenseBottleneck<T>> stage;
      int64_t c = cfg.stage_widths[static_cast<size_t>(i)];
      for (int64_t j = 0; j < cfg.stage_depths[static_cast<size_t>(i)]; ++j) {
        stage.emplace_back(c, cfg.growth, cfg.bottleneck_expansion, rng);
        c += cfg.growth;
      }
      stages_.push_back(std::move(stage));
      if (i < 3)
        transitions_.emplace_back(c, cfg.stage_widths[static_cast<size_t>(i + 1)], rng);
    }
  }

  /// Input sizes are normally constrained to multiples of 32 so every stride
  /// is exact. `relax_input_check` admits any multiple of 4 for small
  /// diagnostic inputs (deep maps then bottom out at 1x1 and the nominal
  /// stride tags overstate the real ratio).
  std::array<FeatureMap<T>, 4> forward(const Var<T>& images,
                                       bool relax_input_check = false) const {
    require_rank(images->value, 4, "backbone input");
    if (images->value.dim(1) != 3)
      throw ShapeError("backbone: expected 3 input channels, got " +
                       std::to_string(images->value.dim(1)));
    const int64_t mult = relax_input_check ? 4 : 32;
    for (int axis : {2, 3}) {
      const int64_t v = images->value.dim(axis);
      if (v < mult || v % mult != 0)
        throw ShapeError(std::string("backbone: input ") + (axis == 2 ? "height" : "width") +
                         " " + std::to_string(v) + " is not a positive multiple of " +
                         std::to_string(mult));
    }
    std::array<FeatureMap<T>, 4> out;
    Var<T> x = stem_norm_.forward(stem_conv_.forward(images));
    int64_t stride = 4;
    for (size_t i = 0; i < 4; ++i) {
      for (const auto& block : stages_[i]) x = block.forward(x);
      out[i] = {x, stride};
      if (i < 3) {
        x = transitions_[i].forward(x);
        stride *= 2;
      }
    }
    return out;
  }

  const BackboneConfig& config() const { return cfg_; }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    stem_conv_.collect_params(prefix + ".stem.conv", out);
    stem_norm_.collect_params(prefix + ".stem.norm", out);
    for (size_t i = 0; i < stages_.size(); ++i)
      for (size_t j = 0; j < stages_[i].size(); ++j)
        stages_[i][j].collect_params(prefix + ".stage" + std::to_string(i + 1) + ".block" +
                                         std::to_string(j),
                                     out);
    for (size_t i = 0; i < transitions_.size(); ++i)
      transitions_[i].collect_params(prefix + ".transition" + std::to_string(i + 1), out);
  }

 private:
  BackboneConfig cfg_;
  Conv2dLayer<T> stem_conv_;
  LayerNormChannels<T> stem_norm_;
  std::vector<std::vector<DenseBottleneck<T>>> stages_;
  std::vector<Transition<T>> transitions_;
};

}  // namespace ledcnet
