#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ledcnet/model/backbone.hpp"
#include "ledcnet/model/config.hpp"
#include "ledcnet/nn/layers.hpp"
#include "ledcnet/ops/attention.hpp"
#include "ledcnet/ops/pool_resize.hpp"

namespace ledcnet {

/// Atrous spatial pyramid pooling over one feature level: a 1x1 branch, one
/// depthwise-separable dilated 3x3 branch per rate, an optional global-pool
/// branch broadcast back to the map size, fused by a 1x1 projection.
template <typename T>
class AsppModule {
 public:
  AsppModule() = default;
  AsppModule(int64_t in_channels, const ASPPConfig& cfg, RandomSource& rng) : cfg_(cfg) {
    cfg.validate();
    branch_1x1_ = ConvBnRelu<T>(in_channels, cfg.out_channels, 1, rng);
    for (int64_t r : cfg.dilation_rates) {
      rate_dw_.emplace_back(in_channels, in_channels, 3,
                            ConvOptions{.padding = r, .dilation = r, .groups = in_channels,
                                        .bias = false},
                            rng);
      rate_pw_.emplace_back(in_channels, cfg.out_channels, 1, rng);
    }
    if (cfg.include_global_pool_branch)
      pool_branch_ = std::make_unique<ConvBnRelu<T>>(in_channels, cfg.out_channels, 1, rng);
    const int64_t nb = 1 + static_cast<int64_t>(cfg.dilation_rates.size()) +
                       (cfg.include_global_pool_branch ? 1 : 0);
    fuse_ = ConvBnRelu<T>(nb * cfg.out_channels, cfg.out_channels, 1, rng);
  }

  Var<T> forward(const Var<T>& x) const {
    const int64_t h = x->value.dim(2), w = x->value.dim(3);
    std::vector<Var<T>> branches;
    branches.push_back(branch_1x1_.forward(x));
    for (size_t i = 0; i < rate_dw_.size(); ++i)
      branches.push_back(rate_pw_[i].forward(rate_dw_[i].forward(x)));
    if (pool_branch_)
      branches.push_back(bilinear_resize(pool_branch_->forward(global_avg_pool(x)), h, w));
    return fuse_.forward(concat_channels(branches));
  }

  void set_training(bool on) {
    branch_1x1_.set_training(on);
    for (auto& pw : rate_pw_) pw.set_training(on);
    if (pool_branch_) pool_branch_->set_training(on);
    fuse_.set_training(on);
  }
  void collect_params(const std::string& prefix, ParamList<T>& out) {
    branch_1x1_.collect_params(prefix + ".branch1x1", out);
    for (size_t i = 0; i < rate_dw_.size(); ++i) {
      const std::string rp = prefix + ".rate" + std::to_string(cfg_.dilation_rates[i]);
      rate_dw_[i].collect_params(rp + ".dw", out);
      rate_pw_[i].collect_params(rp + ".pw", out);
    }
    if (pool_branch_) pool_branch_->collect_params(prefix + ".pool", out);
    fuse_.collect_params(prefix + ".fuse", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<T>& out) {
    branch_1x1_.collect_buffers(prefix + ".branch1x1", out);
    for (size_t i = 0; i < rate_pw_.size(); ++i)
      rate_pw_[i].collect_buffers(prefix + ".rate" + std::to_string(cfg_.dilation_rates[i]) +
                                      ".pw",
                                  out);
    if (pool_branch_) pool_branch_->collect_buffers(prefix + ".pool", out);
    fuse_.collect_buffers(prefix + ".fuse", out);
  }

 private:
  ASPPConfig cfg_;
  ConvBnRelu<T> branch_1x1_;
  std::vector<Conv2dLayer<T>> rate_dw_;
  std::vector<ConvBnRelu<T>> rate_pw_;
  std::unique_ptr<ConvBnRelu<T>> pool_branch_;
  ConvBnRelu<T> fuse_;
};

/// FPN-style lateral fusion: a 1x1 projection per level, bilinear upsampling
/// to the finest level's resolution, channel concatenation.
template <typename T>
class FpnFuse {
 public:
  FpnFuse() = default;
  FpnFuse(const std::vector<int64_t>& in_channels, int64_t lateral_width, RandomSource& rng) {
    for (int64_t c : in_channels) laterals_.emplace_back(c, lateral_width, 1, ConvOptions{}, rng);
  }

  Var<T> forward(const std::vector<Var<T>>& features) const {
    if (features.empty()) throw ShapeError("fpn_fuse: empty feature list");
    if (features.size() != laterals_.size())
      throw ShapeError("fpn_fuse: got " + std::to_string(features.size()) + " features, built for " +
                       std::to_string(laterals_.size()));
    const int64_t n = features[0]->value.dim(0);
    const int64_t h = features[0]->value.dim(2), w = features[0]->value.dim(3);
    std::vector<Var<T>> projected;
    for (size_t i = 0; i < features.size(); ++i) {
      if (features[i]->value.dim(0) != n)
        throw ShapeError("fpn_fuse: batch size mismatch at level " + std::to_string(i));
      projected.push_back(bilinear_resize(laterals_[i].forward(features[i]), h, w));
    }
    if (projected.size() == 1) return projected[0];
    return concat_channels(projected);
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    for (size_t i = 0; i < laterals_.size(); ++i)
      laterals_[i].collect_params(prefix + ".lateral" + std::to_string(i), out);
  }

 private:
  std::vector<Conv2dLayer<T>> laterals_;
};

template <typename T>
struct OcrOutput {
  Var<T> augmented;
  Var<T> region_logits;  // coarse segmentation at feature resolution
};

/// Object-contextual representation: soft object regions are pooled from the
/// pixel features, queried back per pixel with softmax-normalized relation
/// weights, and the context is fused onto the pixel features. The pixel-region
/// relation kappa(x, f) = phi(x)^T psi(f) is used without temperature.
template <typename T>
class OcrModule {
 public:
  OcrModule() = default;
  OcrModule(const OCRConfig& cfg, RandomSource& rng) : cfg_(cfg) {
    cfg.validate();
    region_head_ = Conv2dLayer<T>(cfg.mid_channels, cfg.num_regions, 1, {}, rng);
    phi_ = ConvBnRelu<T>(cfg.mid_channels, cfg.key_dim, 1, rng);
    psi_ = ConvBnRelu<T>(cfg.mid_channels, cfg.key_dim, 1, rng);
    value_ = ConvBnRelu<T>(cfg.mid_channels, cfg.context_channels, 1, rng);
    fuse_ = ConvBnRelu<T>(cfg.mid_channels + cfg.context_channels, cfg.augmented_channels, 1,
                          rng);
  }

  /// Region logits plus per-region representations aggregated with a spatial
  /// softmax. Representations come back as (N, K, mid_channels).
  std::pair<Var<T>, Tensor<T>> soft_object_regions(const Var<T>& pixels) const {
    check_input(pixels);
    Var<T> logits = region_head_.forward(pixels);
    Var<T> reps = region_aggregate(pixels, logits);  // (N, mid, K, 1)
    const int64_t n = reps->value.dim(0), mid = reps->value.dim(1), k = reps->value.dim(2);
    Tensor<T> nkc({n, k, mid});
    for (int64_t b = 0; b < n; ++b)
      for (int64_t r = 0; r < k; ++r)
        for (int64_t c = 0; c < mid; ++c) nkc.at(b, r, c) = reps->value.at(b, c, r, 0);
    return {logits, std::move(nkc)};
  }

  OcrOutput<T> forward(const Var<T>& pixels) const {
    check_input(pixels);
    Var<T> region_logits = region_head_.forward(pixels);
    Var<T> reps = region_aggregate(pixels, region_logits);  // (N, mid, K, 1)
    Var<T> queries = phi_.forward(pixels);
    Var<T> keys = psi_.forward(reps);
    Var<T> values = value_.forward(reps);
    if (capture_) {
      captured_queries_ = queries->value;
      captured_keys_ = keys->value;
      captured_weights_ = std::make_shared<Tensor<T>>();
    }
    Var<T> context = softmax_attention(queries, keys, values, 1.0,
                                       capture_ ? captured_weights_ : nullptr);
    Var<T> augmented = fuse_.forward(concat_channels<T>({pixels, context}));
    return {augmented, region_logits};
  }

  /// Test hook: keep phi/psi maps and the pixel-region weights of the next
  /// forward pass.
  void set_capture(bool on) { capture_ = on; }
  const Tensor<T>& captured_queries() const { return captured_queries_; }
  const Tensor<T>& captured_keys() const { return captured_keys_; }
  const Tensor<T>& captured_weights() const { return *captured_weights_; }

  void set_training(bool on) {
    phi_.set_training(on);
    psi_.set_training(on);
    value_.set_training(on);
    fuse_.set_training(on);
  }
  void collect_params(const std::string& prefix, ParamList<T>& out) {
    region_head_.collect_params(prefix + ".region_head", out);
    phi_.collect_params(prefix + ".phi", out);
    psi_.collect_params(prefix + ".psi", out);
    value_.collect_params(prefix + ".value", out);
    fuse_.collect_params(prefix + ".fuse", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<T>& out) {
    phi_.collect_buffers(prefix + ".phi", out);
    psi_.collect_buffers(prefix + ".psi", out);
    value_.collect_buffers(prefix + ".value", out);
    fuse_.collect_buffers(prefix + ".fuse", out);
  }

 private:
  void check_input(const Var<T>& pixels) const {
    if (pixels->value.dim(1) != cfg_.mid_channels)
      throw ShapeError("ocr: pixel features have " + std::to_string(pixels->value.dim(1)) +
                       " channels, configured mid_channels is " +
                       std::to_string(cfg_.mid_channels));
  }

  OCRConfig cfg_;
  Conv2dLayer<T> region_head_;
  ConvBnRelu<T> phi_, psi_, value_, fuse_;
  bool capture_ = false;
  mutable Tensor<T> captured_queries_;
  mutable Tensor<T> captured_keys_;
  mutable std::shared_ptr<Tensor<T>> captured_weights_;
};

/// Refinement classification head: depthwise-separable 3x3, 1x1 classifier,
/// x4 bilinear upsampling back to the input resolution.
template <typename T>
class RefineHead {
 public:
  RefineHead() = default;
  RefineHead(int64_t in_channels, int64_t head_width, int64_t num_classes, RandomSource& rng)
      : dw_(in_channels, in_channels, 3, {.padding = 1, .groups = in_channels, .bias = false},
            rng),
        pw_(in_channels, head_width, 1, rng),
        classifier_(head_width, num_classes, 1, {}, rng) {}

  Var<T> forward(const Var<T>& x, int64_t out_h, int64_t out_w) const {
    return bilinear_resize(classifier_.forward(pw_.forward(dw_.forward(x))), out_h, out_w);
  }

  void set_training(bool on) { pw_.set_training(on); }
  void collect_params(const std::string& prefix, ParamList<T>& out) {
    dw_.collect_params(prefix + ".dw", out);
    pw_.collect_params(prefix + ".pw", out);
    classifier_.collect_params(prefix + ".classifier", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<T>& out) {
    pw_.collect_buffers(prefix + ".pw", out);
  }

 private:
  Conv2dLayer<T> dw_;
  ConvBnRelu<T> pw_;
  Conv2dLayer<T> classifier_;
};

}  // namespace ledcnet
