#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ledcnet/data/loader.hpp"
#include "ledcnet/model/config.hpp"
#include "ledcnet/train/trainer.hpp"

namespace ledcnet {

/// Flat `section.key = value` configuration text. Lists are comma-separated.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      cfg.set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    if (key.empty()) throw ConfigError("config: empty key");
    values_[key] = value;
  }

  /// Applies a `key=value` override string (the --set flag).
  void set_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  int64_t get_int(const std::string& key, int64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_int(key, it->second);
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
  }
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int64_t> out;
    for (const std::string& tok : split_list(it->second)) out.push_back(to_int(key, tok));
    return out;
  }
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const std::string& tok : split_list(it->second)) out.push_back(to_double(key, tok));
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    return out;
  }
  static int64_t to_int(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const int64_t r = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not an integer: '" + v + "'");
    }
  }
  static double to_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not a number: '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

/// Everything a run needs, resolved with precedence CLI > file > preset.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  int64_t predict_overlap = 64;
  std::string predict_blend = "average";
  Shape profile_input{1, 3, 512, 512};
  int64_t profile_element_bytes = 4;
  bool profile_fps = false;
  int64_t profile_warmup = 1;
  int64_t profile_iters = 3;
};

namespace detail {
inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "model.num_classes", "model.stage_depths", "model.stage_widths", "model.growth",
      "model.stem_width", "model.bottleneck_expansion", "model.use_aspp", "model.aspp_rates",
      "model.aspp_out_channels", "model.aspp_global_pool", "model.fpn_lateral_width",
      "model.use_ocr", "model.ocr_key_dim", "model.ocr_mid_channels",
      "model.ocr_context_channels", "model.ocr_augmented_channels", "model.head_width",
      "train.lr", "train.epochs", "train.batch_size", "train.weight_decay", "train.patience",
      "train.factor", "train.min_lr", "train.mixed_precision", "train.seed",
      "train.aux_weight", "train.focal_gamma", "train.focal_alpha", "train.ignore_index",
      "data.tile_size", "data.overlap", "data.pad_value", "data.mask_pad_label", "data.mean",
      "data.std", "data.augment_flips",
      "predict.overlap", "predict.blend",
      "profile.input", "profile.element_bytes", "profile.fps", "profile.warmup",
      "profile.iters",
  };
  return keys;
}

inline std::array<int64_t, 4> four_entries(const std::string& key,
                                           const std::vector<int64_t>& v) {
  if (v.size() != 4)
    throw ConfigError("config: key '" + key + "' must have exactly 4 entries, got " +
                      std::to_string(v.size()));
  return {v[0], v[1], v[2], v[3]};
}

inline std::array<double, 3> three_entries(const std::string& key,
                                           const std::vector<double>& v) {
  if (v.size() != 3)
    throw ConfigError("config: key '" + key + "' must have exactly 3 entries, got " +
                      std::to_string(v.size()));
  return {v[0], v[1], v[2]};
}
}  // namespace detail

inline RunConfig resolve_run_config(const KeyValueConfig& kv, const std::string& preset) {
  for (const auto& [key, value] : kv.values())
    if (!detail::known_config_keys().count(key))
      throw ConfigError("unknown config key '" + key + "'");

  RunConfig rc;
  if (preset == "base")
    rc.model = ModelConfig::preset_base();
  else if (preset == "large")
    rc.model = ModelConfig::preset_large();
  else
    throw ConfigError("unknown preset '" + preset + "' (expected base or large)");

  ModelConfig& m = rc.model;
  m.num_classes = kv.get_int("model.num_classes", m.num_classes);
  m.backbone.stage_depths = detail::four_entries(
      "model.stage_depths",
      kv.get_int_list("model.stage_depths",
                      {m.backbone.stage_depths.begin(), m.backbone.stage_depths.end()}));
  m.backbone.stage_widths = detail::four_entries(
      "model.stage_widths",
      kv.get_int_list("model.stage_widths",
                      {m.backbone.stage_widths.begin(), m.backbone.stage_widths.end()}));
  m.backbone.growth = kv.get_int("model.growth", m.backbone.growth);
  m.backbone.stem_width = kv.get_int("model.stem_width", m.backbone.stem_width);
  m.backbone.bottleneck_expansion =
      kv.get_int("model.bottleneck_expansion", m.backbone.bottleneck_expansion);
  m.use_aspp = kv.get_bool("model.use_aspp", m.use_aspp);
  m.aspp.dilation_rates = kv.get_int_list("model.aspp_rates", m.aspp.dilation_rates);
  m.aspp.out_channels = kv.get_int("model.aspp_out_channels", m.aspp.out_channels);
  m.aspp.include_global_pool_branch =
      kv.get_bool("model.aspp_global_pool", m.aspp.include_global_pool_branch);
  m.fpn_lateral_width = kv.get_int("model.fpn_lateral_width", m.fpn_lateral_width);
  m.use_ocr = kv.get_bool("model.use_ocr", m.use_ocr);
  m.ocr.key_dim = kv.get_int("model.ocr_key_dim", m.ocr.key_dim);
  m.ocr.mid_channels = kv.get_int("model.ocr_mid_channels", m.ocr.mid_channels);
  m.ocr.context_channels = kv.get_int("model.ocr_context_channels", m.ocr.context_channels);
  m.ocr.augmented_channels =
      kv.get_int("model.ocr_augmented_channels", m.ocr.augmented_channels);
  m.head_width = kv.get_int("model.head_width", m.head_width);
  m.ocr.num_regions = m.num_classes;

  TrainConfig& t = rc.train;
  t.lr = kv.get_double("train.lr", t.lr);
  t.epochs = kv.get_int("train.epochs", t.epochs);
  t.batch_size = kv.get_int("train.batch_size", t.batch_size);
  t.weight_decay = kv.get_double("train.weight_decay", t.weight_decay);
  t.patience = kv.get_int("train.patience", t.patience);
  t.factor = kv.get_double("train.factor", t.factor);
  t.min_lr = kv.get_double("train.min_lr", t.min_lr);
  t.mixed_precision = kv.get_bool("train.mixed_precision", t.mixed_precision);
  t.seed = static_cast<uint64_t>(kv.get_int("train.seed", static_cast<int64_t>(t.seed)));
  t.aux_weight = kv.get_double("train.aux_weight", t.aux_weight);
  t.focal.gamma = kv.get_double("train.focal_gamma", t.focal.gamma);
  t.focal.alpha = kv.get_double("train.focal_alpha", t.focal.alpha);
  t.ignore_index = static_cast<int32_t>(kv.get_int("train.ignore_index", t.ignore_index));

  DataConfig& d = rc.data;
  d.tiling.tile_size = kv.get_int("data.tile_size", d.tiling.tile_size);
  d.tiling.overlap = kv.get_int("data.overlap", d.tiling.overlap);
  d.tiling.pad_value = static_cast<uint8_t>(kv.get_int("data.pad_value", d.tiling.pad_value));
  d.tiling.mask_pad_label =
      static_cast<int32_t>(kv.get_int("data.mask_pad_label", t.ignore_index));
  d.mean = detail::three_entries("data.mean", kv.get_double_list("data.mean",
                                                                 {d.mean.begin(), d.mean.end()}));
  d.std = detail::three_entries("data.std",
                                kv.get_double_list("data.std", {d.std.begin(), d.std.end()}));
  d.augment_flips = kv.get_bool("data.augment_flips", d.augment_flips);

  rc.predict_overlap = kv.get_int("predict.overlap", rc.predict_overlap);
  rc.predict_blend = kv.get_string("predict.blend", rc.predict_blend);
  if (rc.predict_blend != "average" && rc.predict_blend != "crop-center")
    throw ConfigError("predict.blend must be 'average' or 'crop-center'");
  const std::vector<int64_t> shape = kv.get_int_list(
      "profile.input", {rc.profile_input.begin(), rc.profile_input.end()});
  if (shape.size() != 4) throw ConfigError("profile.input must be n,c,h,w");
  rc.profile_input = Shape(shape.begin(), shape.end());
  rc.profile_element_bytes = kv.get_int("profile.element_bytes", rc.profile_element_bytes);
  rc.profile_fps = kv.get_bool("profile.fps", rc.profile_fps);
  rc.profile_warmup = kv.get_int("profile.warmup", rc.profile_warmup);
  rc.profile_iters = kv.get_int("profile.iters", rc.profile_iters);

  rc.model.validate();
  rc.train.validate();
  rc.data.validate();
  return rc;
}

/// Serializes the effective configuration back to the flat text format.
inline std::string effective_config_text(const RunConfig& rc) {
  std::ostringstream os;
  auto list4 = [](const auto& a) {
    std::ostringstream s;
    for (size_t i = 0; i < a.size(); ++i) s << (i ? "," : "") << a[i];
    return s.str();
  };
  os << "model.num_classes = " << rc.model.num_classes << "\n";
  os << "model.stage_depths = " << list4(rc.model.backbone.stage_depths) << "\n";
  os << "model.stage_widths = " << list4(rc.model.backbone.stage_widths) << "\n";
  os << "model.growth = " << rc.model.backbone.growth << "\n";
  os << "model.stem_width = " << rc.model.backbone.stem_width << "\n";
  os << "model.bottleneck_expansion = " << rc.model.backbone.bottleneck_expansion << "\n";
  os << "model.use_aspp = " << (rc.model.use_aspp ? "true" : "false") << "\n";
  os << "model.aspp_rates = " << list4(rc.model.aspp.dilation_rates) << "\n";
  os << "model.aspp_out_channels = " << rc.model.aspp.out_channels << "\n";
  os << "model.aspp_global_pool = "
     << (rc.model.aspp.include_global_pool_branch ? "true" : "false") << "\n";
  os << "model.fpn_lateral_width = " << rc.model.fpn_lateral_width << "\n";
  os << "model.use_ocr = " << (rc.model.use_ocr ? "true" : "false") << "\n";
  os << "model.ocr_key_dim = " << rc.model.ocr.key_dim << "\n";
  os << "model.ocr_mid_channels = " << rc.model.ocr.mid_channels << "\n";
  os << "model.ocr_context_channels = " << rc.model.ocr.context_channels << "\n";
  os << "model.ocr_augmented_channels = " << rc.model.ocr.augmented_channels << "\n";
  os << "model.head_width = " << rc.model.head_width << "\n";
  os << "train.lr = " << rc.train.lr << "\n";
  os << "train.epochs = " << rc.train.epochs << "\n";
  os << "train.batch_size = " << rc.train.batch_size << "\n";
  os << "train.weight_decay = " << rc.train.weight_decay << "\n";
  os << "train.patience = " << rc.train.patience << "\n";
  os << "train.factor = " << rc.train.factor << "\n";
  os << "train.min_lr = " << rc.train.min_lr << "\n";
  os << "train.mixed_precision = " << (rc.train.mixed_precision ? "true" : "false") << "\n";
  os << "train.seed = " << rc.train.seed << "\n";
  os << "train.aux_weight = " << rc.train.aux_weight << "\n";
  os << "train.focal_gamma = " << rc.train.focal.gamma << "\n";
  os << "train.focal_alpha = " << rc.train.focal.alpha << "\n";
  os << "train.ignore_index = " << rc.train.ignore_index << "\n";
  os << "data.tile_size = " << rc.data.tiling.tile_size << "\n";
  os << "data.overlap = " << rc.data.tiling.overlap << "\n";
  os << "data.pad_value = " << static_cast<int>(rc.data.tiling.pad_value) << "\n";
  os << "data.mask_pad_label = " << rc.data.tiling.mask_pad_label << "\n";
  os << "data.mean = " << list4(rc.data.mean) << "\n";
  os << "data.std = " << list4(rc.data.std) << "\n";
  os << "data.augment_flips = " << (rc.data.augment_flips ? "true" : "false") << "\n";
  os << "predict.overlap = " << rc.predict_overlap << "\n";
  os << "predict.blend = " << rc.predict_blend << "\n";
  os << "profile.input = " << list4(rc.profile_input) << "\n";
  os << "profile.element_bytes = " << rc.profile_element_bytes << "\n";
  os << "profile.fps = " << (rc.profile_fps ? "true" : "false") << "\n";
  os << "profile.warmup = " << rc.profile_warmup << "\n";
  os << "profile.iters = " << rc.profile_iters << "\n";
  return os.str();
}

}  // namespace ledcnet
