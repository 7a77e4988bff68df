#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <vector>

#include "ledcnet/data/loader.hpp"
#include "ledcnet/losses/focal.hpp"
#include "ledcnet/metrics/confusion.hpp"
#include "ledcnet/model/ledcnet.hpp"
#include "ledcnet/train/checkpoint.hpp"
#include "ledcnet/train/optimizer.hpp"
#include "ledcnet/train/scheduler.hpp"

namespace ledcnet {

struct TrainConfig {
  double lr = 1e-3;
  int64_t epochs = 100;
  int64_t batch_size = 8;
  double weight_decay = 1e-4;
  int64_t patience = 5;
  double factor = 0.5;
  double min_lr = 1e-6;
  bool mixed_precision = false;
  uint64_t seed = 42;
  double aux_weight = 0.4;
  FocalParams focal;
  int32_t ignore_index = 255;

  void validate() const {
    if (lr <= 0) throw ConfigError("train: lr must be positive");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (!(factor > 0 && factor < 1)) throw ConfigError("train: factor must be in (0,1)");
    if (aux_weight < 0) throw ConfigError("train: aux_weight must be >= 0");
    focal.validate();
  }
};

struct EpochLog {
  int64_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_oa = 0;
  double val_mean_f1 = 0;
  double val_miou = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  double best_miou = 0;
  int64_t best_epoch = -1;
};

/// Evaluation against a split with an arbitrary tile predictor (the model in
/// production; an oracle in tests). Streams tiles into one confusion matrix.
template <typename T>
MetricReport evaluate_with(const DatasetManifest& manifest, const std::string& split,
                           const DataConfig& dcfg, int64_t num_classes, int32_t ignore_index,
                           const std::function<Tensor<int32_t>(const Sample<T>&)>& predictor) {
  TiledDataset ds(manifest, split, dcfg);
  ConfusionMatrix cm(num_classes);
  for (const TileRef& ref : ds.tiles()) {
    Sample<T> s = ds.template sample<T>(ref);
    cm.update(predictor(s), s.mask, ignore_index);
  }
  return MetricReport::from(cm, manifest.palette.names());
}

/// Argmax of the refined logits for one normalized tile batch of size one.
template <typename T>
Tensor<int32_t> predict_tile(Ledcnet<T>& model, const Tensor<T>& image) {
  NoGradGuard ng;
  const int64_t h = image.dim(1), w = image.dim(2);
  DecoderOutput<T> out = model.forward(make_leaf(image.reshaped({1, 3, h, w})));
  return argmax_classes(out.refined_logits->value.reshaped(
      {out.refined_logits->value.dim(1), h, w}));
}

template <typename T>
MetricReport evaluate_model(Ledcnet<T>& model, const DatasetManifest& manifest,
                            const std::string& split, const DataConfig& dcfg,
                            int32_t ignore_index = 255) {
  if (model.config().num_classes != manifest.palette.num_classes())
    throw ConfigError("evaluate: model has " + std::to_string(model.config().num_classes) +
                      " classes, manifest palette has " +
                      std::to_string(manifest.palette.num_classes()));
  const bool was_training = model.training();
  model.set_training(false);
  MetricReport report = evaluate_with<T>(
      manifest, split, dcfg, model.config().num_classes, ignore_index,
      [&](const Sample<T>& s) { return predict_tile(model, s.image); });
  model.set_training(was_training);
  return report;
}

namespace detail {
inline void append_log_line(const std::filesystem::path& csv, const EpochLog& e,
                            bool write_header) {
  std::ofstream os(csv, std::ios::app);
  if (!os) throw IoError("cannot append to log: " + csv.string());
  if (write_header) os << "epoch,lr,train_loss,val_OA,val_meanF1,val_mIoU\n";
  os << e.epoch << ',' << std::setprecision(10) << e.lr << ',' << e.train_loss << ','
     << e.val_oa << ',' << e.val_mean_f1 << ',' << e.val_miou << "\n";
}
}  // namespace detail

/// Optimizes the dual-output focal objective with AdamW, evaluates the val
/// split each epoch, feeds mIoU to the plateau scheduler and keeps
/// best-by-mIoU and last checkpoints.
template <typename T>
TrainResult train(Ledcnet<T>& model, const DatasetManifest& manifest, const TrainConfig& tcfg,
                  const DataConfig& dcfg, const std::filesystem::path& out_dir) {
  tcfg.validate();
  dcfg.validate();
  if (model.config().num_classes != manifest.palette.num_classes())
    throw ConfigError("train: model has " + std::to_string(model.config().num_classes) +
                      " classes, manifest palette has " +
                      std::to_string(manifest.palette.num_classes()));
  std::filesystem::create_directories(out_dir);
  TiledDataset train_ds(manifest, "train", dcfg);
  TiledDataset val_ds(manifest, "val", dcfg);

  AdamW<T> opt(model.named_params(),
               {.lr = tcfg.lr, .weight_decay = tcfg.weight_decay});
  ReduceLROnPlateau sched(tcfg.lr, {.factor = tcfg.factor, .patience = tcfg.patience,
                                    .min_lr = tcfg.min_lr, .maximize = true});

  TrainResult result;
  result.best_checkpoint = out_dir / "best.ckpt";
  result.last_checkpoint = out_dir / "last.ckpt";
  const std::filesystem::path csv = out_dir / "train_log.csv";

  RandomSource flip_rng(tcfg.seed ^ 0xF11Full);
  for (int64_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    model.set_training(true);
    const std::vector<TileRef> order = train_ds.epoch_order(tcfg.seed, epoch);
    double loss_sum = 0;
    int64_t batches = 0;
    for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      std::vector<Sample<T>> samples;
      for (size_t i = start; i < std::min(order.size(), start + tcfg.batch_size); ++i) {
        Sample<T> s = train_ds.template sample<T>(order[i]);
        if (dcfg.augment_flips) {
          const uint64_t pick = flip_rng.below(4);
          apply_flip(s, pick == 1   ? Flip::kHorizontal
                        : pick == 2 ? Flip::kVertical
                                    : Flip::kNone);
        }
        samples.push_back(std::move(s));
      }
      auto [images, masks] = stack_samples(samples);
      Var<T> input = make_leaf(std::move(images));
      DecoderOutput<T> out = model.forward(input);
      Var<T> loss = combined_loss(out.refined_logits, out.coarse_logits, masks, tcfg.focal,
                                  tcfg.aux_weight, tcfg.ignore_index);
      const double loss_value = static_cast<double>(loss->value[0]);
      if (!std::isfinite(loss_value))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batches));
      opt.zero_grad();
      backward(loss);
      opt.step();
      release_graph(loss);
      loss_sum += loss_value;
      ++batches;
    }

    MetricReport val = evaluate_model(model, manifest, "val", dcfg, tcfg.ignore_index);
    const double new_lr = sched.step(val.mean_iou);
    opt.set_learning_rate(new_lr);

    EpochLog log{epoch, new_lr, loss_sum / std::max<int64_t>(batches, 1), val.overall_accuracy,
                 val.mean_f1, val.mean_iou};
    result.log.push_back(log);
    detail::append_log_line(csv, log, epoch == 0);

    save_checkpoint(result.last_checkpoint, model, {epoch, val.mean_iou});
    if (val.mean_iou > result.best_miou || result.best_epoch < 0) {
      result.best_miou = val.mean_iou;
      result.best_epoch = epoch;
      save_checkpoint(result.best_checkpoint, model, {epoch, val.mean_iou});
    }
  }
  return result;
}

enum class BlendRule { kAverage, kCropCenter };

/// Whole-raster prediction: tile, forward, stitch, decode to the palette.
/// Average blending accumulates softmax scores over overlaps before the
/// argmax; crop-center takes each pixel from the tile it is most interior to.
template <typename T>
Tensor<int32_t> predict_raster(Ledcnet<T>& model, const ImageU8& image, const DataConfig& dcfg,
                               BlendRule blend = BlendRule::kAverage) {
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard ng;
  const std::vector<TileOrigin> grid = tile_grid(image.height, image.width, dcfg.tiling);
  const int64_t t = dcfg.tiling.tile_size;
  const int64_t classes = model.config().num_classes;
  std::vector<Tensor<T>> prob_tiles;
  std::vector<Tensor<int32_t>> class_tiles;
  for (const TileOrigin& o : grid) {
    Tensor<T> norm = normalize_image<T>(crop_tile(image, o, dcfg.tiling), dcfg);
    DecoderOutput<T> out = model.forward(make_leaf(norm.reshaped({1, 3, t, t})));
    Tensor<T> logits = out.refined_logits->value.reshaped({classes, t, t});
    if (blend == BlendRule::kAverage) {
      // per-pixel softmax so overlaps average probabilities
      for (int64_t y = 0; y < t; ++y)
        for (int64_t x = 0; x < t; ++x) {
          T mx = logits.at(0, y, x);
          for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, logits.at(c, y, x));
          T z = 0;
          for (int64_t c = 0; c < classes; ++c) {
            logits.at(c, y, x) = std::exp(logits.at(c, y, x) - mx);
            z += logits.at(c, y, x);
          }
          for (int64_t c = 0; c < classes; ++c) logits.at(c, y, x) /= z;
        }
      prob_tiles.push_back(std::move(logits));
    } else {
      class_tiles.push_back(argmax_classes(logits));
    }
  }
  model.set_training(was_training);
  if (blend == BlendRule::kAverage)
    return argmax_classes(stitch_average(prob_tiles, grid, image.height, image.width));
  return stitch_class_tiles(class_tiles, grid, image.height, image.width);
}

/// Runs prediction on an image file and writes both encodings: a single
/// channel index mask and the palette RGB rendering.
template <typename T>
Tensor<int32_t> predict_to_files(Ledcnet<T>& model, const std::filesystem::path& image_path,
                                 const DataConfig& dcfg, const LabelPalette& palette,
                                 const std::filesystem::path& out_prefix,
                                 BlendRule blend = BlendRule::kAverage) {
  const ImageU8 image = read_png(image_path.string());
  Tensor<int32_t> class_map = predict_raster(model, image, dcfg, blend);
  ImageU8 index_img;
  index_img.height = class_map.dim(0);
  index_img.width = class_map.dim(1);
  index_img.channels = 1;
  index_img.pixels.resize(static_cast<size_t>(index_img.height * index_img.width));
  for (int64_t i = 0; i < class_map.numel(); ++i)
    index_img.pixels[static_cast<size_t>(i)] = static_cast<uint8_t>(class_map[i]);
  write_png(out_prefix.string() + "_mask.png", index_img);
  write_png(out_prefix.string() + "_rgb.png", decode_mask(class_map, palette));
  return class_map;
}

}  // namespace ledcnet
