#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "ledcnet/core/tensor.hpp"
#include "ledcnet/data/png_io.hpp"

namespace ledcnet {

/// Ordered class palette; the list index is the class index and class 0 is the
/// background.
struct LabelPalette {
  struct Entry {
    std::string name;
    std::array<uint8_t, 3> rgb;
  };
  std::vector<Entry> classes;

  int64_t num_classes() const { return static_cast<int64_t>(classes.size()); }

  void validate() const {
    if (classes.empty()) throw ConfigError("palette: at least one class required");
    std::set<std::array<uint8_t, 3>> seen;
    for (const auto& e : classes)
      if (!seen.insert(e.rgb).second)
        throw ConfigError("palette: duplicate RGB triple for class '" + e.name + "'");
  }

  static LabelPalette default_palette() {
    return {{{"background", {0, 0, 0}}, {"house", {255, 0, 0}}, {"road", {0, 255, 0}}}};
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : classes) out.push_back(e.name);
    return out;
  }
};

struct EncodeResult {
  Tensor<int32_t> mask;      // (H, W) class indices
  int64_t unknown_pixels = 0;  // colors not in the palette, mapped to ignore
};

/// RGB palette mask -> class-index mask. Off-palette colors map to
/// ignore_index and are tallied for the warning summary.
inline EncodeResult encode_mask(const ImageU8& rgb, const LabelPalette& palette,
                                int32_t ignore_index) {
  palette.validate();
  if (rgb.channels != 3) throw DataError("encode_mask: expected an RGB mask image");
  EncodeResult out{Tensor<int32_t>({rgb.height, rgb.width}), 0};
  for (int64_t y = 0; y < rgb.height; ++y)
    for (int64_t x = 0; x < rgb.width; ++x) {
      const std::array<uint8_t, 3> px{rgb.at(y, x, 0), rgb.at(y, x, 1), rgb.at(y, x, 2)};
      int32_t cls = -1;
      for (size_t k = 0; k < palette.classes.size(); ++k)
        if (palette.classes[k].rgb == px) {
          cls = static_cast<int32_t>(k);
          break;
        }
      if (cls < 0) {
        cls = ignore_index;
        ++out.unknown_pixels;
      }
      out.mask.at(y, x) = cls;
    }
  return out;
}

/// Class-index mask -> RGB palette mask. Indices outside the palette (the
/// ignore label) render black.
inline ImageU8 decode_mask(const Tensor<int32_t>& mask, const LabelPalette& palette) {
  palette.validate();
  require_rank(mask, 2, "decode_mask input");
  ImageU8 out;
  out.height = mask.dim(0);
  out.width = mask.dim(1);
  out.channels = 3;
  out.pixels.assign(static_cast<size_t>(out.height * out.width * 3), 0);
  for (int64_t y = 0; y < out.height; ++y)
    for (int64_t x = 0; x < out.width; ++x) {
      const int32_t cls = mask.at(y, x);
      if (cls < 0 || cls >= palette.num_classes()) continue;
      const auto& rgb = palette.classes[static_cast<size_t>(cls)].rgb;
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = rgb[static_cast<size_t>(c)];
    }
  return out;
}

}  // namespace ledcnet
