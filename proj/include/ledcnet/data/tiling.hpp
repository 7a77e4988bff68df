#pragma once

#include <string>
#include <vector>

#include "ledcnet/core/tensor.hpp"
#include "ledcnet/data/png_io.hpp"

namespace ledcnet {

struct TilingSpec {
  int64_t tile_size = 512;
  int64_t overlap = 0;
  uint8_t pad_value = 0;
  int32_t mask_pad_label = 255;

  void validate() const {
    if (tile_size < 1) throw ParameterError("tiling: tile_size must be positive");
    if (overlap < 0 || overlap >= tile_size)
      throw ParameterError("tiling: overlap must be in [0, tile_size)");
  }
};

struct TileOrigin {
  int64_t y = 0;
  int64_t x = 0;
};

/// Origins of a covering grid with stride tile_size - overlap. The grid always
/// reaches the right/bottom edge; the caller pads the remainder.
inline std::vector<TileOrigin> tile_grid(int64_t height, int64_t width, const TilingSpec& spec) {
  spec.validate();
  if (height < 1 || width < 1) throw DataError("tiling: empty image");
  const int64_t step = spec.tile_size - spec.overlap;
  std::vector<int64_t> ys, xs;
  for (int64_t y = 0;; y += step) {
    ys.push_back(y);
    if (y + spec.tile_size >= height) break;
  }
  for (int64_t x = 0;; x += step) {
    xs.push_back(x);
    if (x + spec.tile_size >= width) break;
  }
  std::vector<TileOrigin> out;
  for (int64_t y : ys)
    for (int64_t x : xs) out.push_back({y, x});
  return out;
}

inline ImageU8 crop_tile(const ImageU8& img, const TileOrigin& o, const TilingSpec& spec) {
  const int64_t t = spec.tile_size;
  ImageU8 out;
  out.height = t;
  out.width = t;
  out.channels = img.channels;
  out.pixels.assign(static_cast<size_t>(t * t * img.channels), spec.pad_value);
  const int64_t ylim = std::min(t, img.height - o.y);
  const int64_t xlim = std::min(t, img.width - o.x);
  for (int64_t y = 0; y < ylim; ++y)
    for (int64_t x = 0; x < xlim; ++x)
      for (int64_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(o.y + y, o.x + x, c);
  return out;
}

inline Tensor<int32_t> crop_mask_tile(const Tensor<int32_t>& mask, const TileOrigin& o,
                                      const TilingSpec& spec) {
  require_rank(mask, 2, "crop_mask_tile input");
  const int64_t t = spec.tile_size;
  Tensor<int32_t> out = Tensor<int32_t>::full({t, t}, spec.mask_pad_label);
  const int64_t ylim = std::min(t, mask.dim(0) - o.y);
  const int64_t xlim = std::min(t, mask.dim(1) - o.x);
  for (int64_t y = 0; y < ylim; ++y)
    for (int64_t x = 0; x < xlim; ++x) out.at(y, x) = mask.at(o.y + y, o.x + x);
  return out;
}

/// Covering tiling of a whole raster; origins are kept for stitching.
inline std::vector<std::pair<ImageU8, TileOrigin>> tile_image(const ImageU8& img,
                                                              const TilingSpec& spec) {
  if (img.height < 1 || img.width < 1) throw DataError("tile_image: empty image");
  std::vector<std::pair<ImageU8, TileOrigin>> out;
  for (const TileOrigin& o : tile_grid(img.height, img.width, spec))
    out.emplace_back(crop_tile(img, o, spec), o);
  return out;
}

namespace detail {
inline void check_tile_coverage(const std::vector<TileOrigin>& origins, int64_t tile,
                                int64_t height, int64_t width) {
  // Minimal bounding box of uncovered pixels, reported on failure.
  std::vector<uint8_t> covered(static_cast<size_t>(height * width), 0);
  for (const auto& o : origins) {
    const int64_t y1 = std::min(o.y + tile, height), x1 = std::min(o.x + tile, width);
    for (int64_t y = std::max<int64_t>(o.y, 0); y < y1; ++y)
      std::fill(covered.begin() + y * width + std::max<int64_t>(o.x, 0),
                covered.begin() + y * width + x1, uint8_t(1));
  }
  int64_t y0 = height, x0 = width, y1 = -1, x1 = -1;
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x)
      if (!covered[static_cast<size_t>(y * width + x)]) {
        y0 = std::min(y0, y);
        x0 = std::min(x0, x);
        y1 = std::max(y1, y);
        x1 = std::max(x1, x);
      }
  if (y1 >= 0)
    throw DataError("stitch: tiles leave rectangle [y " + std::to_string(y0) + ".." +
                    std::to_string(y1) + ", x " + std::to_string(x0) + ".." +
                    std::to_string(x1) + "] uncovered");
}
}  // namespace detail

/// Reassembles class-map tiles by the crop-center rule: each output pixel is
/// taken from the tile in which it lies most interior (ties keep the earlier
/// tile). Padding beyond the raster bounds is discarded.
inline Tensor<int32_t> stitch_class_tiles(const std::vector<Tensor<int32_t>>& tiles,
                                          const std::vector<TileOrigin>& origins,
                                          int64_t height, int64_t width) {
  if (tiles.size() != origins.size())
    throw ParameterError("stitch: tile/origin count mismatch");
  if (tiles.empty()) throw DataError("stitch: no tiles");
  const int64_t t = tiles[0].dim(0);
  detail::check_tile_coverage(origins, t, height, width);
  Tensor<int32_t> out({height, width});
  Tensor<int32_t> best = Tensor<int32_t>::full({height, width}, -1);
  for (size_t i = 0; i < tiles.size(); ++i) {
    require_rank(tiles[i], 2, "stitch tile");
    const TileOrigin& o = origins[i];
    const int64_t ylim = std::min(t, height - o.y), xlim = std::min(t, width - o.x);
    for (int64_t y = 0; y < ylim; ++y)
      for (int64_t x = 0; x < xlim; ++x) {
        const int32_t margin = static_cast<int32_t>(
            std::min(std::min(y, t - 1 - y), std::min(x, t - 1 - x)));
        if (margin > best.at(o.y + y, o.x + x)) {
          best.at(o.y + y, o.x + x) = margin;
          out.at(o.y + y, o.x + x) = tiles[i].at(y, x);
        }
      }
  }
  return out;
}

/// Averages per-class score tiles (C, t, t) over their overlaps; padding past
/// the raster edge is discarded.
template <typename T>
Tensor<T> stitch_average(const std::vector<Tensor<T>>& tiles,
                         const std::vector<TileOrigin>& origins, int64_t height,
                         int64_t width) {
  if (tiles.size() != origins.size())
    throw ParameterError("stitch: tile/origin count mismatch");
  if (tiles.empty()) throw DataError("stitch: no tiles");
  require_rank(tiles[0], 3, "stitch tile");
  const int64_t c = tiles[0].dim(0), t = tiles[0].dim(1);
  detail::check_tile_coverage(origins, t, height, width);
  Tensor<T> accum({c, height, width});
  Tensor<T> count({height, width});
  for (size_t i = 0; i < tiles.size(); ++i) {
    const TileOrigin& o = origins[i];
    const int64_t ylim = std::min(t, height - o.y), xlim = std::min(t, width - o.x);
    for (int64_t y = 0; y < ylim; ++y)
      for (int64_t x = 0; x < xlim; ++x) {
        count.at(o.y + y, o.x + x) += T(1);
        for (int64_t ch = 0; ch < c; ++ch)
          accum.at(ch, o.y + y, o.x + x) += tiles[i].at(ch, y, x);
      }
  }
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x)
      for (int64_t ch = 0; ch < c; ++ch) accum.at(ch, y, x) /= count.at(y, x);
  return accum;
}

/// Lowest-index argmax over the class axis of (C, H, W) scores.
template <typename T>
Tensor<int32_t> argmax_classes(const Tensor<T>& scores) {
  require_rank(scores, 3, "argmax input");
  const int64_t c = scores.dim(0), h = scores.dim(1), w = scores.dim(2);
  Tensor<int32_t> out({h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      int32_t best = 0;
      T bv = scores.at(0, y, x);
      for (int64_t ch = 1; ch < c; ++ch)
        if (scores.at(ch, y, x) > bv) {
          bv = scores.at(ch, y, x);
          best = static_cast<int32_t>(ch);
        }
      out.at(y, x) = best;
    }
  return out;
}

}  // namespace ledcnet
