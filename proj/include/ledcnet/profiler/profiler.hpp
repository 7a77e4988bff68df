#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ledcnet/core/cost.hpp"
#include "ledcnet/model/ledcnet.hpp"

namespace ledcnet {

/// Model scale summary mirroring the efficiency table: parameter count, MACs
/// for one forward pass at the stated input, serialized size at the stated
/// element width, and measured throughput.
struct EfficiencyReport {
  std::string name;
  int64_t params = 0;
  int64_t macs = 0;
  int64_t flops_2x = 0;  // 2 * macs
  int64_t size_bytes = 0;
  int64_t element_bytes = 4;
  Shape input_shape;
  double fps = 0;  // 0 when not measured
  int64_t fps_warmup = 0;
  int64_t fps_iters = 0;
  int64_t fps_batch = 0;
  std::string hardware;
  std::map<std::string, int64_t> macs_by_kind;
};

template <typename T>
int64_t count_params(Ledcnet<T>& model) {
  int64_t total = 0;
  for (const auto& p : model.named_params()) total += p.var->value.numel();
  return total;
}

/// Analytic MAC count for one forward pass, collected by tracing the real
/// graph with the cost recorder. Unrecognized op kinds raise rather than
/// silently vanish from the tally.
template <typename T>
cost::CostRecorder count_macs_detailed(Ledcnet<T>& model, const Shape& input_shape) {
  if (input_shape.size() != 4)
    throw ShapeError("count_macs: input shape must be rank 4, got " + shape_str(input_shape));
  cost::CostRecorder recorder;
  const bool was_training = model.training();
  model.set_training(false);
  {
    cost::CostRecorder::Scope scope(recorder);
    NoGradGuard ng;
    Var<T> x = make_leaf(Tensor<T>(input_shape));
    model.forward(x);
  }
  model.set_training(was_training);
  return recorder;
}

template <typename T>
int64_t count_macs(Ledcnet<T>& model, const Shape& input_shape) {
  return count_macs_detailed(model, input_shape).total_macs();
}

inline std::string hardware_description() {
  std::string name = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    const auto pos = line.find("model name");
    if (pos != std::string::npos) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) name = line.substr(colon + 2);
      break;
    }
  }
  return name + ", " + std::to_string(std::thread::hardware_concurrency()) + " threads";
}

/// Median frames-per-second over `iters` timed forward passes after `warmup`
/// discarded ones.
template <typename T>
double measure_fps(Ledcnet<T>& model, const Shape& input_shape, int64_t warmup, int64_t iters) {
  if (iters < 1) throw ParameterError("measure_fps: iters must be >= 1");
  if (input_shape.size() != 4) throw ShapeError("measure_fps: input shape must be rank 4");
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard ng;
  Tensor<T> input(input_shape);
  const double batch = static_cast<double>(input_shape[0]);
  std::vector<double> rates;
  for (int64_t i = 0; i < warmup + iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forward(make_leaf(input));
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    if (i >= warmup) rates.push_back(batch / std::max(sec, 1e-12));
  }
  model.set_training(was_training);
  std::sort(rates.begin(), rates.end());
  const size_t n = rates.size();
  const double median = n % 2 ? rates[n / 2] : 0.5 * (rates[n / 2 - 1] + rates[n / 2]);
  return median;
}

template <typename T>
EfficiencyReport profile_model(Ledcnet<T>& model, const Shape& input_shape,
                               int64_t element_bytes = 4, bool with_fps = false,
                               int64_t warmup = 1, int64_t iters = 3) {
  EfficiencyReport r;
  r.params = count_params(model);
  cost::CostRecorder rec = count_macs_detailed(model, input_shape);
  r.macs = rec.total_macs();
  r.macs_by_kind = rec.by_kind();
  r.flops_2x = 2 * r.macs;
  r.element_bytes = element_bytes;
  r.size_bytes = r.params * element_bytes;
  r.input_shape = input_shape;
  r.hardware = hardware_description();
  if (with_fps) {
    r.fps = measure_fps(model, input_shape, warmup, iters);
    r.fps_warmup = warmup;
    r.fps_iters = iters;
    r.fps_batch = input_shape[0];
  }
  return r;
}

inline nlohmann::json report_to_json(const EfficiencyReport& r) {
  return nlohmann::json{
      {"name", r.name},
      {"params", r.params},
      {"macs", r.macs},
      {"flops_2x", r.flops_2x},
      {"size_bytes", r.size_bytes},
      {"element_bytes", r.element_bytes},
      {"input_shape", r.input_shape},
      {"fps", r.fps},
      {"fps_warmup", r.fps_warmup},
      {"fps_iters", r.fps_iters},
      {"fps_batch", r.fps_batch},
      {"hardware", r.hardware},
      {"macs_by_kind", r.macs_by_kind},
  };
}

/// Aligned text table: Params (M), Size (MB), FLOPs (G), FPS. The FLOPs
/// column uses the 2*MAC convention; the JSON carries both counts.
inline std::string report_table(const std::vector<EfficiencyReport>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "Method" << std::right << std::setw(12) << "Params (M)"
     << std::setw(12) << "Size (MB)" << std::setw(12) << "FLOPs (G)" << std::setw(10) << "FPS"
     << "\n";
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(18) << r.name << std::right << std::setprecision(3)
       << std::setw(12) << r.params / 1e6 << std::setw(12) << r.size_bytes / 1e6
       << std::setprecision(3) << std::setw(12) << r.flops_2x / 1e9;
    if (r.fps > 0)
      os << std::setprecision(1) << std::setw(10) << r.fps;
    else
      os << std::setw(10) << "-";
    os << "\n";
  }
  return os.str();
}

}  // namespace ledcnet
