#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "ledcnet/model/ledcnet.hpp"

namespace ledcnet {

struct CheckpointMeta {
  int64_t epoch = -1;
  double val_miou = 0;
};

namespace detail {

constexpr char kCheckpointMagic[4] = {'L', 'E', 'D', 'C'};
constexpr uint32_t kCheckpointVersion = 1;

template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}

inline void write_blob(std::ostream& os, const std::string& s) {
  write_pod<uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_blob(std::istream& is) {
  const uint64_t len = read_pod<uint64_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw IoError("checkpoint: truncated file");
  return s;
}

inline void write_array(std::ostream& os, const std::string& name, const Shape& shape,
                        const double* data, int64_t numel) {
  write_blob(os, name);
  write_pod<uint8_t>(os, static_cast<uint8_t>(shape.size()));
  for (int64_t d : shape) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
  os.write(reinterpret_cast<const char*>(data), numel * static_cast<int64_t>(sizeof(double)));
}

}  // namespace detail

/// Writes the archive: magic, config JSON, metadata JSON, then every named
/// parameter and buffer as a 64-bit array keyed by its dotted path.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, Ledcnet<T>& model,
                     const CheckpointMeta& meta = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  os.write(detail::kCheckpointMagic, 4);
  detail::write_pod<uint32_t>(os, detail::kCheckpointVersion);
  nlohmann::json cfg = model.config();
  detail::write_blob(os, cfg.dump());
  nlohmann::json meta_j{{"epoch", meta.epoch}, {"val_miou", meta.val_miou}};
  detail::write_blob(os, meta_j.dump());

  const ParamList<T> params = model.named_params();
  const BufferList<T> buffers = model.named_buffers();
  detail::write_pod<uint64_t>(os, params.size() + buffers.size());
  for (const auto& p : params) {
    const Tensor<double> d = p.var->value.template cast<double>();
    detail::write_array(os, p.name, d.shape(), d.data(), d.numel());
  }
  for (const auto& b : buffers) {
    const Tensor<double> d = b.tensor->template cast<double>();
    detail::write_array(os, b.name, d.shape(), d.data(), d.numel());
  }
  if (!os) throw IoError("checkpoint: write failed for " + path.string());
}

inline void check_checkpoint_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  const uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != detail::kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
}

inline ModelConfig peek_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  check_checkpoint_header(is, path.string());
  return nlohmann::json::parse(detail::read_blob(is)).get<ModelConfig>();
}

/// Fills a model (already built with the matching config) from the archive.
/// Name or shape mismatches are configuration errors.
template <typename T>
CheckpointMeta load_checkpoint(const std::filesystem::path& path, Ledcnet<T>& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  check_checkpoint_header(is, path.string());
  detail::read_blob(is);  // config JSON, already consumed by the builder
  const nlohmann::json meta_j = nlohmann::json::parse(detail::read_blob(is));
  CheckpointMeta meta{meta_j.value("epoch", int64_t(-1)), meta_j.value("val_miou", 0.0)};

  std::map<std::string, Tensor<double>> arrays;
  const uint64_t n = detail::read_pod<uint64_t>(is);
  for (uint64_t i = 0; i < n; ++i) {
    const std::string name = detail::read_blob(is);
    const uint8_t ndim = detail::read_pod<uint8_t>(is);
    Shape shape;
    for (uint8_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<int64_t>(detail::read_pod<uint64_t>(is)));
    Tensor<double> t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            t.numel() * static_cast<int64_t>(sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated array " + name);
    arrays.emplace(name, std::move(t));
  }

  auto fill = [&](const std::string& name, auto& dst) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ConfigError("checkpoint: missing array " + name);
    if (it->second.shape() != dst.shape())
      throw ConfigError("checkpoint: shape mismatch for " + name + ": file " +
                        shape_str(it->second.shape()) + ", model " + shape_str(dst.shape()));
    for (int64_t i = 0; i < dst.numel(); ++i) dst[i] = static_cast<T>(it->second[i]);
    arrays.erase(it);
  };
  for (const auto& p : model.named_params()) fill(p.name, p.var->value);
  for (const auto& b : model.named_buffers()) fill(b.name, *b.tensor);
  if (!arrays.empty())
    throw ConfigError("checkpoint: unused array " + arrays.begin()->first +
                      " (model/config mismatch)");
  return meta;
}

/// Builds a model from the archive's embedded config, then loads the weights.
template <typename T>
std::pair<std::unique_ptr<Ledcnet<T>>, CheckpointMeta> load_checkpoint_model(
    const std::filesystem::path& path) {
  const ModelConfig cfg = peek_checkpoint_config(path);
  auto model = std::make_unique<Ledcnet<T>>(cfg);
  CheckpointMeta meta = load_checkpoint(path, *model);
  return {std::move(model), meta};
}

}  // namespace ledcnet
