#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "ledcnet/cli/config_file.hpp"
#include "ledcnet/data/synthetic.hpp"
#include "ledcnet/profiler/profiler.hpp"
#include "ledcnet/train/trainer.hpp"

namespace ledcnet::cli {

namespace detail {

inline LabelPalette auto_palette(int64_t num_classes) {
  if (num_classes == 3) return LabelPalette::default_palette();
  LabelPalette p;
  p.classes.push_back({"background", {0, 0, 0}});
  for (int64_t k = 1; k < num_classes; ++k)
    p.classes.push_back({"class" + std::to_string(k),
                         {static_cast<uint8_t>((k * 67) % 255 + 1),
                          static_cast<uint8_t>((k * 151) % 256),
                          static_cast<uint8_t>((k * 29) % 256)}});
  return p;
}

inline void echo_config(const RunConfig& rc, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir / "config.effective.cfg");
  if (!os) throw IoError("cannot write effective config under " + out_dir.string());
  os << effective_config_text(rc);
}

struct AblationRow {
  std::string label;
  bool use_aspp = false;
  bool use_ocr = false;
  int64_t params = 0;
  MetricReport report;
};

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "Configuration" << std::right << std::setw(18)
     << "Overall Accuracy" << std::setw(16) << "Mean F1-Score" << std::setw(10) << "mIoU"
     << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows)
    os << std::left << std::setw(24) << r.label << std::right << std::setw(18)
       << r.report.overall_accuracy * 100.0 << std::setw(16) << r.report.mean_f1 * 100.0
       << std::setw(10) << r.report.mean_iou * 100.0 << "\n";
  return os.str();
}

template <typename T>
int run_train(const RunConfig& rc, const std::filesystem::path& manifest_path,
              const std::filesystem::path& out_dir) {
  DatasetManifest manifest = DatasetManifest::load(manifest_path);
  ModelConfig mc = rc.model;
  mc.num_classes = manifest.palette.num_classes();
  mc.ocr.num_regions = mc.num_classes;
  Ledcnet<T> model(mc, rc.train.seed);
  TrainResult result = train(model, manifest, rc.train, rc.data, out_dir);
  const EpochLog& last = result.log.back();
  std::cout << "trained " << rc.train.epochs << " epochs; final train_loss=" << std::fixed
            << std::setprecision(6) << last.train_loss << " val_mIoU=" << std::setprecision(4)
            << last.val_miou << "\n";
  std::cout << "best checkpoint: " << result.best_checkpoint.string() << " (epoch "
            << result.best_epoch << ", mIoU " << std::setprecision(4) << result.best_miou
            << ")\n";
  return 0;
}

}  // namespace detail

/// Command-line entry point shared by the binary and the tests.
/// Exit codes: 0 success, 1 validation error, 2 runtime failure.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"LEDCNet semantic segmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, checkpoint_path, image_path;
  std::string out_dir = "out", preset = "base", split = "val";
  std::vector<std::string> overrides;
  int64_t seed = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file");
    cmd->add_option("--manifest", manifest_path, "dataset manifest JSON");
    cmd->add_option("--checkpoint", checkpoint_path, "checkpoint archive");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "seed for all randomness");
    cmd->add_option("--set", overrides, "config override key=value (repeatable)");
    cmd->add_option("--preset", preset, "architecture preset: base or large");
  };

  CLI::App* cmd_train = app.add_subcommand("train", "train a model");
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  CLI::App* cmd_predict = app.add_subcommand("predict", "segment a whole raster");
  CLI::App* cmd_profile = app.add_subcommand("profile", "parameter/FLOPs/size/FPS report");
  CLI::App* cmd_ablate = app.add_subcommand("ablate", "run the four decoder-toggle configs");
  for (CLI::App* c : {cmd_train, cmd_eval, cmd_predict, cmd_profile, cmd_ablate}) add_common(c);
  cmd_eval->add_option("--split", split, "dataset split to score (default val)");
  cmd_predict->add_option("--image", image_path, "input raster PNG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    KeyValueConfig kv;
    if (!config_path.empty()) kv = KeyValueConfig::parse_file(config_path);
    if (seed >= 0) kv.set("train.seed", std::to_string(seed));
    for (const std::string& s : overrides) kv.set_override(s);
    const RunConfig rc = resolve_run_config(kv, preset);
    detail::echo_config(rc, out_dir);

    if (app.got_subcommand(cmd_train)) {
      if (manifest_path.empty()) throw ConfigError("missing manifest_path");
      if (rc.train.mixed_precision)
        return detail::run_train<float>(rc, manifest_path, out_dir);
      return detail::run_train<double>(rc, manifest_path, out_dir);
    }

    if (app.got_subcommand(cmd_eval)) {
      if (checkpoint_path.empty()) throw ConfigError("missing checkpoint_path");
      if (manifest_path.empty()) throw ConfigError("missing manifest_path");
      DatasetManifest manifest = DatasetManifest::load(manifest_path);
      auto [model, meta] = load_checkpoint_model<double>(checkpoint_path);
      MetricReport report = evaluate_model(*model, manifest, split, rc.data,
                                           rc.train.ignore_index);
      const std::string text = report.to_text();
      std::cout << text;
      std::ofstream(out_dir + "/metrics_" + split + ".txt") << text;
      return 0;
    }

    if (app.got_subcommand(cmd_predict)) {
      if (checkpoint_path.empty()) throw ConfigError("missing checkpoint_path");
      if (image_path.empty()) throw ConfigError("missing image_path");
      auto [model, meta] = load_checkpoint_model<double>(checkpoint_path);
      LabelPalette palette = detail::auto_palette(model->config().num_classes);
      if (!manifest_path.empty()) {
        DatasetManifest manifest = DatasetManifest::load(manifest_path);
        palette = manifest.palette;
      }
      DataConfig pcfg = rc.data;
      pcfg.tiling.overlap = rc.predict_overlap;
      const BlendRule blend =
          rc.predict_blend == "average" ? BlendRule::kAverage : BlendRule::kCropCenter;
      const std::filesystem::path prefix =
          std::filesystem::path(out_dir) / std::filesystem::path(image_path).stem();
      predict_to_files(*model, image_path, pcfg, palette, prefix, blend);
      std::cout << "wrote " << prefix.string() << "_mask.png and _rgb.png\n";
      return 0;
    }

    if (app.got_subcommand(cmd_profile)) {
      Ledcnet<double> model(rc.model, rc.train.seed);
      EfficiencyReport report =
          profile_model(model, rc.profile_input, rc.profile_element_bytes, rc.profile_fps,
                        rc.profile_warmup, rc.profile_iters);
      report.name = "LEDCNet-" + preset;
      std::ofstream(out_dir + "/efficiency.json") << report_to_json(report).dump(2) << "\n";
      std::cout << report_table({report});
      return 0;
    }

    if (app.got_subcommand(cmd_ablate)) {
      if (manifest_path.empty()) throw ConfigError("missing manifest_path");
      DatasetManifest manifest = DatasetManifest::load(manifest_path);
      std::vector<detail::AblationRow> rows = {
          {"Baseline", false, false, 0, {}},
          {"Baseline + ASPP", true, false, 0, {}},
          {"Baseline + OCR", false, true, 0, {}},
          {"Baseline + ASPP + OCR", true, true, 0, {}},
      };
      nlohmann::json out_rows = nlohmann::json::array();
      for (auto& row : rows) {
        RunConfig cfg = rc;
        cfg.model.use_aspp = row.use_aspp;
        cfg.model.use_ocr = row.use_ocr;
        cfg.model.num_classes = manifest.palette.num_classes();
        cfg.model.ocr.num_regions = cfg.model.num_classes;
        Ledcnet<double> model(cfg.model, cfg.train.seed);
        row.params = count_params(model);
        const std::filesystem::path run_dir =
            std::filesystem::path(out_dir) /
            ("ablate_" + std::string(row.use_aspp ? "aspp" : "noaspp") + "_" +
             (row.use_ocr ? "ocr" : "noocr"));
        train(model, manifest, cfg.train, cfg.data, run_dir);
        row.report = evaluate_model(model, manifest, "val", cfg.data, cfg.train.ignore_index);
        out_rows.push_back({{"label", row.label},
                            {"params", row.params},
                            {"overall_accuracy", row.report.overall_accuracy},
                            {"mean_f1", row.report.mean_f1},
                            {"miou", row.report.mean_iou}});
      }
      const std::string table = detail::ablation_table(rows);
      std::cout << table;
      std::ofstream(out_dir + "/ablation.json") << out_rows.dump(2) << "\n";
      std::ofstream(out_dir + "/ablation.txt") << table;
      return 0;
    }
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ledcnet::cli
