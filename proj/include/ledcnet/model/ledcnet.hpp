#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ledcnet/model/backbone.hpp"
#include "ledcnet/model/decoder.hpp"

namespace ledcnet {

/// Both network outputs at input resolution. When the OCR stage is disabled
/// the coarse output aliases the refined one so loss code stays uniform.
template <typename T>
struct DecoderOutput {
  Var<T> coarse_logits;
  Var<T> refined_logits;
};

/// The full encoder-decoder segmentation network: LDCNet encoder, per-level
/// ASPP on the first three features, FPN lateral fusion, OCR attention and a
/// refinement head. The ASPP and OCR stages are independently toggleable,
/// giving the four ablation graphs.
template <typename T>
class Ledcnet {
 public:
  explicit Ledcnet(const ModelConfig& cfg, uint64_t seed = 42) : cfg_(cfg) {
    cfg.validate();
    RandomSource rng(seed);
    backbone_ = Backbone<T>(cfg.backbone, rng);
    std::vector<int64_t> lateral_in;
    for (int i = 0; i < 3; ++i) {
      const int64_t c = cfg.backbone.stage_out_channels(i);
      if (cfg.use_aspp) {
        aspp_.emplace_back(c, cfg.aspp, rng);
        lateral_in.push_back(cfg.aspp.out_channels);
      } else {
        lateral_in.push_back(c);
      }
    }
    lateral_in.push_back(cfg.backbone.stage_out_channels(3));
    fpn_ = FpnFuse<T>(lateral_in, cfg.fpn_lateral_width, rng);
    reduce_dw_ = Conv2dLayer<T>(4 * cfg.fpn_lateral_width, 4 * cfg.fpn_lateral_width, 3,
                                {.padding = 1, .groups = 4 * cfg.fpn_lateral_width,
                                 .bias = false},
                                rng);
    reduce_pw_ = ConvBnRelu<T>(4 * cfg.fpn_lateral_width, cfg.ocr.mid_channels, 1, rng);
    if (cfg.use_ocr) ocr_ = std::make_unique<OcrModule<T>>(cfg.ocr, rng);
    const int64_t head_in = cfg.use_ocr ? cfg.ocr.augmented_channels : cfg.ocr.mid_channels;
    head_ = RefineHead<T>(head_in, cfg.head_width, cfg.num_classes, rng);
  }

  std::array<FeatureMap<T>, 4> encode(const Var<T>& images,
                                      bool relax_input_check = false) const {
    return backbone_.forward(images, relax_input_check);
  }

  DecoderOutput<T> decode(const std::array<FeatureMap<T>, 4>& features) const {
    std::vector<Var<T>> lateral_in;
    for (int i = 0; i < 3; ++i)
      lateral_in.push_back(cfg_.use_aspp ? aspp_[static_cast<size_t>(i)].forward(features[i].data)
                                         : features[i].data);
    lateral_in.push_back(features[3].data);
    Var<T> fused = fpn_.forward(lateral_in);
    Var<T> pixels = reduce_pw_.forward(reduce_dw_.forward(fused));
    const int64_t out_h = 4 * pixels->value.dim(2);
    const int64_t out_w = 4 * pixels->value.dim(3);
    if (cfg_.use_ocr) {
      OcrOutput<T> ocr_out = ocr_->forward(pixels);
      Var<T> refined = head_.forward(ocr_out.augmented, out_h, out_w);
      Var<T> coarse = bilinear_resize(ocr_out.region_logits, out_h, out_w);
      return {coarse, refined};
    }
    Var<T> refined = head_.forward(pixels, out_h, out_w);
    return {refined, refined};
  }

  DecoderOutput<T> forward(const Var<T>& images, bool relax_input_check = false) const {
    return decode(encode(images, relax_input_check));
  }

  const ModelConfig& config() const { return cfg_; }
  OcrModule<T>* ocr() { return ocr_.get(); }

  void set_training(bool on) {
    training_ = on;
    for (auto& a : aspp_) a.set_training(on);
    reduce_pw_.set_training(on);
    if (ocr_) ocr_->set_training(on);
    head_.set_training(on);
  }
  bool training() const { return training_; }

  ParamList<T> named_params() {
    ParamList<T> out;
    backbone_.collect_params("backbone", out);
    for (size_t i = 0; i < aspp_.size(); ++i)
      aspp_[i].collect_params("aspp" + std::to_string(i + 1), out);
    fpn_.collect_params("fpn", out);
    reduce_dw_.collect_params("reduce.dw", out);
    reduce_pw_.collect_params("reduce.pw", out);
    if (ocr_) ocr_->collect_params("ocr", out);
    head_.collect_params("head", out);
    return out;
  }

  BufferList<T> named_buffers() {
    BufferList<T> out;
    for (size_t i = 0; i < aspp_.size(); ++i)
      aspp_[i].collect_buffers("aspp" + std::to_string(i + 1), out);
    reduce_pw_.collect_buffers("reduce.pw", out);
    if (ocr_) ocr_->collect_buffers("ocr", out);
    head_.collect_buffers("head", out);
    return out;
  }

 private:
  ModelConfig cfg_;
  Backbone<T> backbone_;
  std::vector<AsppModule<T>> aspp_;
  FpnFuse<T> fpn_;
  Conv2dLayer<T> reduce_dw_;
  ConvBnRelu<T> reduce_pw_;
  std::unique_ptr<OcrModule<T>> ocr_;
  RefineHead<T> head_;
  bool training_ = true;
};

}  // namespace ledcnet
