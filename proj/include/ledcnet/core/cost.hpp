#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "ledcnet/core/errors.hpp"

namespace ledcnet::cost {

/// Dimension bag handed to the MAC rules. Ops fill the fields that apply.
struct OpDims {
  int64_t kh = 0, kw = 0, cin = 0, cout = 0, hout = 0, wout = 0, groups = 1;  // conv
  int64_t elems = 0;                                                          // pointwise ops
  int64_t d = 0, nq = 0, nkv = 0, channels = 0;                               // attention
};

/// Accumulates multiply-accumulate counts while a forward pass runs.
/// Every op kind must have a rule; an unknown kind is an accounting hole and
/// is reported as an error instead of being skipped.
class CostRecorder {
 public:
  CostRecorder() = default;

  int64_t total_macs() const { return total_; }
  const std::map<std::string, int64_t>& by_kind() const { return by_kind_; }

  void add(const std::string& kind, const OpDims& dims) {
    total_ += macs_for(kind, dims);
    by_kind_[kind] += macs_for(kind, dims);
  }

  static int64_t macs_for(const std::string& kind, const OpDims& d) {
    if (kind == "conv2d") return d.kh * d.kw * (d.cin / d.groups) * d.cout * d.hout * d.wout;
    if (kind == "add" || kind == "scale" || kind == "relu" || kind == "gelu" ||
        kind == "layer_norm" || kind == "batch_norm" || kind == "softmax")
      return d.elems;
    if (kind == "avg_pool2d") return d.kh * d.kw * d.elems;  // elems = output elements
    if (kind == "global_avg_pool") return d.elems;           // elems = input elements
    if (kind == "bilinear_resize") return 4 * d.elems;       // 4-tap kernel per output element
    if (kind == "attention") return d.d * d.nq * d.nkv + d.nq * d.nkv + d.channels * d.nq * d.nkv;
    if (kind == "region_aggregate") return d.nq * d.nkv + d.channels * d.nq * d.nkv;
    throw UnsupportedLayerError("unsupported layer kind '" + kind + "' in MAC accounting");
  }

  // scoped activation
  class Scope {
   public:
    explicit Scope(CostRecorder& r) : prev_(active_ptr()) { active_ptr() = &r; }
    ~Scope() { active_ptr() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    CostRecorder* prev_;
  };

  static CostRecorder* active() { return active_ptr(); }

 private:
  static CostRecorder*& active_ptr() {
    static thread_local CostRecorder* active = nullptr;
    return active;
  }

  int64_t total_ = 0;
  std::map<std::string, int64_t> by_kind_;
};

inline void record(const std::string& kind, const OpDims& dims) {
  if (CostRecorder* r = CostRecorder::active()) r->add(kind, dims);
}

}  // namespace ledcnet::cost
