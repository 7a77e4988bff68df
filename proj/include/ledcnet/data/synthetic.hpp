#pragma once

#include <algorithm>
#include <filesystem>
#include <string>

#include "ledcnet/core/random.hpp"
#include "ledcnet/data/manifest.hpp"
#include "ledcnet/data/palette.hpp"

namespace ledcnet {

struct ProbeSpec {
  int64_t num_tiles = 8;
  int64_t tile_size = 64;
  uint64_t seed = 7;
  int64_t noise = 12;  // per-channel uniform pixel noise amplitude
};

namespace detail {
inline int64_t snap4(int64_t v) { return (v / 4) * 4; }

inline uint8_t clamp_u8(int64_t v) {
  return static_cast<uint8_t>(std::clamp<int64_t>(v, 0, 255));
}
}  // namespace detail

/// Writes a small synthetic dataset of geometric shapes: axis-aligned
/// rectangles as "house", full-span stripes as "road", everything else
/// background. Shape edges snap to multiples of 4 so boundaries align with the
/// stride-4 logit grid. The same tiles are emitted under the train and val
/// splits (distinct files). Returns the manifest path.
inline std::filesystem::path make_probe_dataset(const std::filesystem::path& dir,
                                                const ProbeSpec& spec = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  RandomSource rng(spec.seed);
  const LabelPalette palette = LabelPalette::default_palette();
  const int64_t t = spec.tile_size;
  // class base colors: background, house, road
  const int64_t base[3][3] = {{40, 160, 70}, {200, 80, 60}, {90, 90, 90}};

  DatasetManifest manifest;
  manifest.palette = palette;
  manifest.root = dir;
  for (int64_t i = 0; i < spec.num_tiles; ++i) {
    Tensor<int32_t> mask({t, t});
    // one road stripe, horizontal or vertical, thickness 8..16
    {
      const bool horizontal = rng.below(2) == 0;
      const int64_t thick = 8 + 4 * static_cast<int64_t>(rng.below(3));
      const int64_t pos = detail::snap4(static_cast<int64_t>(rng.below(
          static_cast<uint64_t>(t - thick))));
      for (int64_t a = pos; a < pos + thick; ++a)
        for (int64_t b = 0; b < t; ++b) {
          if (horizontal)
            mask.at(a, b) = 2;
          else
            mask.at(b, a) = 2;
        }
    }
    // two house rectangles, 16..28 a side
    for (int rect = 0; rect < 2; ++rect) {
      const int64_t hh = 16 + 4 * static_cast<int64_t>(rng.below(4));
      const int64_t ww = 16 + 4 * static_cast<int64_t>(rng.below(4));
      const int64_t y0 = detail::snap4(static_cast<int64_t>(rng.below(
          static_cast<uint64_t>(t - hh))));
      const int64_t x0 = detail::snap4(static_cast<int64_t>(rng.below(
          static_cast<uint64_t>(t - ww))));
      for (int64_t y = y0; y < y0 + hh; ++y)
        for (int64_t x = x0; x < x0 + ww; ++x) mask.at(y, x) = 1;
    }

    ImageU8 img;
    img.height = t;
    img.width = t;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(t * t * 3));
    for (int64_t y = 0; y < t; ++y)
      for (int64_t x = 0; x < t; ++x) {
        const int32_t cls = mask.at(y, x);
        for (int64_t c = 0; c < 3; ++c) {
          const int64_t noise =
              static_cast<int64_t>(rng.below(static_cast<uint64_t>(2 * spec.noise + 1))) -
              spec.noise;
          img.at(y, x, c) = detail::clamp_u8(base[cls][c] + noise);
        }
      }

    for (const char* split : {"train", "val"}) {
      const std::string stem = std::string(split) + "_" + std::to_string(i);
      write_png((dir / (stem + "_img.png")).string(), img);
      write_png((dir / (stem + "_mask.png")).string(), decode_mask(mask, palette));
      manifest.records.push_back({stem + "_img.png", stem + "_mask.png", split});
    }
  }
  const fs::path manifest_path = dir / "manifest.json";
  manifest.save(manifest_path);
  return manifest_path;
}

}  // namespace ledcnet
