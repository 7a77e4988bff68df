#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledcnet/core/errors.hpp"

namespace ledcnet {

struct BackboneConfig {
  std::array<int64_t, 4> stage_depths{2, 2, 6, 2};
  std::array<int64_t, 4> stage_widths{16, 32, 192, 512};
  int64_t growth = 40;
  int64_t stem_width = 16;
  int64_t bottleneck_expansion = 3;

  void validate() const {
    for (int64_t d : stage_depths)
      if (d < 1) throw ConfigError("backbone: stage depths must be >= 1");
    for (int64_t w : stage_widths)
      if (w < 1) throw ConfigError("backbone: stage widths must be > 0");
    if (growth < 1) throw ConfigError("backbone: growth must be > 0");
    if (stem_width < 1) throw ConfigError("backbone: stem width must be > 0");
    if (bottleneck_expansion < 1) throw ConfigError("backbone: bottleneck expansion must be >= 1");
    if (stem_width != stage_widths[0])
      throw ConfigError("backbone: stage_widths[0] must equal stem_width (stage 1 consumes the "
                        "stem output directly)");
  }

  /// Channel count emitted by stage i (before that stage's transition).
  int64_t stage_out_channels(int i) const {
    return stage_widths[static_cast<size_t>(i)] + stage_depths[static_cast<size_t>(i)] * growth;
  }
};

struct ASPPConfig {
  std::vector<int64_t> dilation_rates{6, 12, 18};
  int64_t out_channels = 24;
  bool include_global_pool_branch = true;

  void validate() const {
    if (dilation_rates.empty()) throw ParameterError("aspp: dilation rate list must be non-empty");
    for (size_t i = 0; i < dilation_rates.size(); ++i) {
      if (dilation_rates[i] < 1) throw ParameterError("aspp: rates must be >= 1");
      if (i > 0 && dilation_rates[i] <= dilation_rates[i - 1])
        throw ParameterError("aspp: rates must be strictly increasing");
    }
    if (out_channels < 1) throw ConfigError("aspp: out_channels must be > 0");
  }
};

struct OCRConfig {
  int64_t num_regions = 3;  // K, one soft region per class
  int64_t key_dim = 64;
  int64_t mid_channels = 128;
  int64_t context_channels = 64;    // width of the transformed region values
  int64_t augmented_channels = 96;  // width of the fused pixel+context feature

  void validate() const {
    if (num_regions < 1) throw ConfigError("ocr: num_regions must be > 0");
    if (key_dim < 1) throw ConfigError("ocr: key_dim must be > 0");
    if (mid_channels < 1 || context_channels < 1 || augmented_channels < 1)
      throw ConfigError("ocr: channel widths must be > 0");
  }
};

struct ModelConfig {
  int64_t num_classes = 3;
  BackboneConfig backbone;
  ASPPConfig aspp;
  OCRConfig ocr;
  int64_t fpn_lateral_width = 16;
  int64_t head_width = 64;
  bool use_aspp = true;
  bool use_ocr = true;

  void validate() const {
    if (num_classes < 1) throw ConfigError("model: num_classes must be > 0");
    backbone.validate();
    aspp.validate();
    ocr.validate();
    if (ocr.num_regions != num_classes)
      throw ConfigError("ocr: num_regions (" + std::to_string(ocr.num_regions) +
                        ") must equal num_classes (" + std::to_string(num_classes) + ")");
    if (fpn_lateral_width < 1) throw ConfigError("model: fpn_lateral_width must be > 0");
    if (head_width < 1) throw ConfigError("model: head_width must be > 0");
  }

  static ModelConfig preset_base(int64_t num_classes = 3) {
    ModelConfig c;
    c.num_classes = num_classes;
    c.ocr.num_regions = num_classes;
    return c;
  }

  /// Same widths as the base preset, three times the block stacks per stage.
  static ModelConfig preset_large(int64_t num_classes = 3) {
    ModelConfig c = preset_base(num_classes);
    c.backbone.stage_depths = {6, 6, 18, 6};
    return c;
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"num_classes", c.num_classes},
      {"stage_depths", c.backbone.stage_depths},
      {"stage_widths", c.backbone.stage_widths},
      {"growth", c.backbone.growth},
      {"stem_width", c.backbone.stem_width},
      {"bottleneck_expansion", c.backbone.bottleneck_expansion},
      {"aspp_rates", c.aspp.dilation_rates},
      {"aspp_out_channels", c.aspp.out_channels},
      {"aspp_global_pool", c.aspp.include_global_pool_branch},
      {"ocr_key_dim", c.ocr.key_dim},
      {"ocr_mid_channels", c.ocr.mid_channels},
      {"ocr_context_channels", c.ocr.context_channels},
      {"ocr_augmented_channels", c.ocr.augmented_channels},
      {"fpn_lateral_width", c.fpn_lateral_width},
      {"head_width", c.head_width},
      {"use_aspp", c.use_aspp},
      {"use_ocr", c.use_ocr},
  };
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("num_classes").get_to(c.num_classes);
  j.at("stage_depths").get_to(c.backbone.stage_depths);
  j.at("stage_widths").get_to(c.backbone.stage_widths);
  j.at("growth").get_to(c.backbone.growth);
  j.at("stem_width").get_to(c.backbone.stem_width);
  j.at("bottleneck_expansion").get_to(c.backbone.bottleneck_expansion);
  j.at("aspp_rates").get_to(c.aspp.dilation_rates);
  j.at("aspp_out_channels").get_to(c.aspp.out_channels);
  j.at("aspp_global_pool").get_to(c.aspp.include_global_pool_branch);
  j.at("ocr_key_dim").get_to(c.ocr.key_dim);
  j.at("ocr_mid_channels").get_to(c.ocr.mid_channels);
  j.at("ocr_context_channels").get_to(c.ocr.context_channels);
  j.at("ocr_augmented_channels").get_to(c.ocr.augmented_channels);
  j.at("fpn_lateral_width").get_to(c.fpn_lateral_width);
  j.at("head_width").get_to(c.head_width);
  j.at("use_aspp").get_to(c.use_aspp);
  j.at("use_ocr").get_to(c.use_ocr);
  c.ocr.num_regions = c.num_classes;
}

}  // namespace ledcnet
