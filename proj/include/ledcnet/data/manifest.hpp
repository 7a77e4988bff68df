#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledcnet/data/palette.hpp"

namespace ledcnet {

struct ManifestRecord {
  std::string image;
  std::string mask;
  std::string split;  // train | val | test
};

/// Dataset manifest: the class palette plus (image, mask, split) records.
/// Relative record paths resolve against the manifest's directory.
struct DatasetManifest {
  LabelPalette palette;
  std::vector<ManifestRecord> records;
  std::filesystem::path root;

  void validate() const {
    palette.validate();
    std::set<std::string> paths;
    for (const auto& r : records) {
      if (r.split != "train" && r.split != "val" && r.split != "test")
        throw ConfigError("manifest: invalid split '" + r.split + "' for record " + r.image);
      if (!paths.insert(r.image).second)
        throw ConfigError("manifest: duplicate path " + r.image);
      if (!paths.insert(r.mask).second)
        throw ConfigError("manifest: duplicate path " + r.mask);
    }
  }

  std::vector<ManifestRecord> split_records(const std::string& split) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records)
      if (r.split == split) out.push_back(r);
    return out;
  }

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : root / fp;
  }

  static DatasetManifest load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest: invalid JSON in " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.root = path.parent_path();
    try {
      for (const auto& e : j.at("palette")) {
        LabelPalette::Entry entry;
        entry.name = e.at("name").get<std::string>();
        const auto rgb = e.at("rgb");
        for (size_t c = 0; c < 3; ++c) entry.rgb[c] = rgb.at(c).get<uint8_t>();
        m.palette.classes.push_back(entry);
      }
      for (const auto& e : j.at("records"))
        m.records.push_back({e.at("image").get<std::string>(), e.at("mask").get<std::string>(),
                             e.at("split").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest: missing or malformed field in " + path.string() + ": " +
                        e.what());
    }
    m.validate();
    return m;
  }

  void save(const std::filesystem::path& path) const {
    validate();
    nlohmann::json j;
    j["palette"] = nlohmann::json::array();
    for (const auto& e : palette.classes)
      j["palette"].push_back({{"name", e.name}, {"rgb", {e.rgb[0], e.rgb[1], e.rgb[2]}}});
    j["records"] = nlohmann::json::array();
    for (const auto& r : records)
      j["records"].push_back({{"image", r.image}, {"mask", r.mask}, {"split", r.split}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
  }
};

/// Loads a mask file as class indices. Single-channel images already hold
/// indices; RGB images are matched against the palette.
inline EncodeResult load_mask(const std::filesystem::path& path, const LabelPalette& palette,
                              int32_t ignore_index) {
  ImageU8 img = read_png(path.string());
  if (img.channels == 1) {
    EncodeResult out{Tensor<int32_t>({img.height, img.width}), 0};
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) {
        const int32_t v = img.at(y, x, 0);
        if (v != ignore_index && v >= palette.num_classes()) {
          out.mask.at(y, x) = ignore_index;
          ++out.unknown_pixels;
        } else {
          out.mask.at(y, x) = v;
        }
      }
    return out;
  }
  return encode_mask(img, palette, ignore_index);
}

}  // namespace ledcnet
