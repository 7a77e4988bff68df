#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ledcnet/core/random.hpp"
#include "ledcnet/core/tensor.hpp"
#include "ledcnet/data/manifest.hpp"
#include "ledcnet/data/tiling.hpp"

namespace ledcnet {

struct DataConfig {
  TilingSpec tiling;
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.5, 0.5, 0.5};
  bool augment_flips = false;

  void validate() const {
    tiling.validate();
    for (double s : std)
      if (s <= 0) throw ConfigError("data: std must be positive");
  }
};

/// (x/255 - mean) / std per channel; HWC bytes to CHW reals.
template <typename T>
Tensor<T> normalize_image(const ImageU8& img, const DataConfig& cfg) {
  if (img.channels != 3) throw DataError("normalize_image: expected an RGB image");
  Tensor<T> out({3, img.height, img.width});
  for (int64_t c = 0; c < 3; ++c) {
    const double m = cfg.mean[static_cast<size_t>(c)], s = cfg.std[static_cast<size_t>(c)];
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        out.at(c, y, x) =
            static_cast<T>((static_cast<double>(img.at(y, x, c)) / 255.0 - m) / s);
  }
  return out;
}

/// One training sample: a normalized tile and its class-index mask.
template <typename T>
struct Sample {
  Tensor<T> image;         // (3, t, t)
  Tensor<int32_t> mask;    // (t, t)
};

enum class Flip { kNone, kHorizontal, kVertical };

template <typename T>
void apply_flip(Sample<T>& s, Flip f) {
  if (f == Flip::kNone) return;
  const int64_t h = s.mask.dim(0), w = s.mask.dim(1);
  Sample<T> out{Tensor<T>({3, h, w}), Tensor<int32_t>({h, w})};
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const int64_t sy = f == Flip::kVertical ? h - 1 - y : y;
      const int64_t sx = f == Flip::kHorizontal ? w - 1 - x : x;
      out.mask.at(y, x) = s.mask.at(sy, sx);
      for (int64_t c = 0; c < 3; ++c) out.image.at(c, y, x) = s.image.at(c, sy, sx);
    }
  s = std::move(out);
}

/// Reference to one tile of one dataset record.
struct TileRef {
  size_t record = 0;
  TileOrigin origin;
};

/// Tiles every record of a split. Records whose rasters already match the tile
/// size yield themselves.
class TiledDataset {
 public:
  TiledDataset(const DatasetManifest& manifest, const std::string& split, const DataConfig& cfg)
      : manifest_(manifest), cfg_(cfg), records_(manifest.split_records(split)) {
    cfg.validate();
    if (records_.empty()) throw ConfigError("dataset: split '" + split + "' is empty");
    for (size_t r = 0; r < records_.size(); ++r) {
      ImageU8 img = read_png(manifest_.resolve(records_[r].image).string());
      for (const TileOrigin& o : tile_grid(img.height, img.width, cfg.tiling))
        tiles_.push_back({r, o});
    }
  }

  size_t size() const { return tiles_.size(); }
  const std::vector<TileRef>& tiles() const { return tiles_; }

  template <typename T>
  Sample<T> sample(const TileRef& ref) const {
    const ManifestRecord& rec = records_[ref.record];
    ImageU8 img = read_png(manifest_.resolve(rec.image).string());
    EncodeResult enc =
        load_mask(manifest_.resolve(rec.mask), manifest_.palette, cfg_.tiling.mask_pad_label);
    if (enc.mask.dim(0) != img.height || enc.mask.dim(1) != img.width)
      throw DataError("dataset: image/mask size mismatch for " + rec.image);
    Sample<T> s{normalize_image<T>(crop_tile(img, ref.origin, cfg_.tiling), cfg_),
                crop_mask_tile(enc.mask, ref.origin, cfg_.tiling)};
    return s;
  }

  /// Deterministic per-epoch order: a seeded shuffle of the tile list.
  std::vector<TileRef> epoch_order(uint64_t seed, int64_t epoch) const {
    std::vector<TileRef> order = tiles_;
    RandomSource rng(seed ^ (0x9E3779B97F4A7C15ull * static_cast<uint64_t>(epoch + 1)));
    rng.shuffle(order);
    return order;
  }

 private:
  const DatasetManifest& manifest_;
  DataConfig cfg_;
  std::vector<ManifestRecord> records_;
  std::vector<TileRef> tiles_;
};

/// Stacks samples into (N,3,t,t) images and (N,t,t) masks.
template <typename T>
std::pair<Tensor<T>, Tensor<int32_t>> stack_samples(const std::vector<Sample<T>>& samples) {
  if (samples.empty()) throw DataError("stack_samples: empty batch");
  const int64_t n = static_cast<int64_t>(samples.size());
  const int64_t h = samples[0].mask.dim(0), w = samples[0].mask.dim(1);
  Tensor<T> images({n, 3, h, w});
  Tensor<int32_t> masks({n, h, w});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(samples[static_cast<size_t>(i)].image.data(),
              samples[static_cast<size_t>(i)].image.data() + 3 * h * w,
              images.data() + i * 3 * h * w);
    std::copy(samples[static_cast<size_t>(i)].mask.data(),
              samples[static_cast<size_t>(i)].mask.data() + h * w, masks.data() + i * h * w);
  }
  return {std::move(images), std::move(masks)};
}

}  // namespace ledcnet
