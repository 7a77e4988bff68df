#pragma once

#include <cmath>
#include <optional>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/tensor.hpp"
#include "ledcnet/ops/pointwise.hpp"

namespace ledcnet {

/// Focusing/balancing parameters of the focal loss
/// FL(p_t) = -alpha * (1 - p_t)^gamma * log(p_t).
/// alpha is a single scalar applied to every class; a per-class weight vector
/// would slot in here if class-frequency balancing is ever needed.
struct FocalParams {
  double gamma = 2.0;
  double alpha = 0.25;

  void validate() const {
    if (gamma < 0) throw ParameterError("focal: gamma must be >= 0");
    // alpha = 1 is admitted so the gamma = 0 case degenerates to plain
    // cross-entropy.
    if (!(alpha > 0 && alpha <= 1)) throw ParameterError("focal: alpha must be in (0,1]");
  }
};

constexpr double kFocalEps = 1e-7;

/// Mean focal loss over non-ignored pixels. p_t is the softmax probability of
/// the target class, clamped to [eps, 1-eps] before the log. Out-of-range
/// targets are reported with their pixel coordinates.
template <typename T>
Var<T> focal_loss(const Var<T>& logits, const Tensor<int32_t>& targets, const FocalParams& fp,
                  std::optional<int32_t> ignore_index = std::nullopt) {
  fp.validate();
  require_rank(logits->value, 4, "focal_loss logits");
  require_rank(targets, 3, "focal_loss targets");
  const int64_t n = logits->value.dim(0), c = logits->value.dim(1);
  const int64_t h = logits->value.dim(2), w = logits->value.dim(3);
  if (targets.dim(0) != n || targets.dim(1) != h || targets.dim(2) != w)
    throw ShapeError("focal_loss: target shape " + shape_str(targets.shape()) +
                     " does not match logits " + shape_str(logits->value.shape()));

  const int64_t plane = h * w;
  // Per-pixel softmax probability of the target class; kept for backward.
  Tensor<T> probs({n, c, h, w});
  const T* lp = logits->value.data();
  double total = 0;
  int64_t counted = 0;
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t s = 0; s < plane; ++s) {
      const int32_t t = targets[b * plane + s];
      if (ignore_index && t == *ignore_index) continue;
      if (t < 0 || t >= c)
        throw DataError("focal_loss: target class " + std::to_string(t) +
                        " out of range [0," + std::to_string(c) + ") at pixel (n=" +
                        std::to_string(b) + ", y=" + std::to_string(s / w) + ", x=" +
                        std::to_string(s % w) + ")");
      T mx = lp[(b * c) * plane + s];
      for (int64_t ch = 1; ch < c; ++ch) mx = std::max(mx, lp[(b * c + ch) * plane + s]);
      T z = 0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T e = std::exp(lp[(b * c + ch) * plane + s] - mx);
        probs.data()[(b * c + ch) * plane + s] = e;
        z += e;
      }
      for (int64_t ch = 0; ch < c; ++ch) probs.data()[(b * c + ch) * plane + s] /= z;
      double pt = static_cast<double>(probs.data()[(b * c + t) * plane + s]);
      pt = std::min(std::max(pt, kFocalEps), 1.0 - kFocalEps);
      total += -fp.alpha * std::pow(1.0 - pt, fp.gamma) * std::log(pt);
      ++counted;
    }
  }
  const double mean = counted > 0 ? total / static_cast<double>(counted) : 0.0;

  Tensor<T> out({}, {static_cast<T>(mean)});
  return make_result<T>(
      std::move(out), {logits},
      [logits, targets, fp, ignore_index, probs = std::move(probs), counted, n, c, plane,
       w](Node<T>& self) {
        if (!logits->requires_grad || counted == 0) return;
        const double upstream = static_cast<double>(self.grad[0]);
        const double inv_m = upstream / static_cast<double>(counted);
        Tensor<T>& dl = logits->ensure_grad();
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t s = 0; s < plane; ++s) {
            const int32_t t = targets[b * plane + s];
            if (ignore_index && t == *ignore_index) continue;
            const double pt_raw = static_cast<double>(probs.data()[(b * c + t) * plane + s]);
            if (pt_raw < kFocalEps || pt_raw > 1.0 - kFocalEps) continue;  // clamped: flat
            const double one_m = 1.0 - pt_raw;
            // d/dp of -alpha (1-p)^g log p
            const double dldp =
                fp.alpha * (fp.gamma * std::pow(one_m, fp.gamma - 1.0) * std::log(pt_raw) -
                            std::pow(one_m, fp.gamma) / pt_raw);
            for (int64_t ch = 0; ch < c; ++ch) {
              const double sc = static_cast<double>(probs.data()[(b * c + ch) * plane + s]);
              const double dpdl = pt_raw * ((ch == t ? 1.0 : 0.0) - sc);
              dl.data()[(b * c + ch) * plane + s] += static_cast<T>(inv_m * dldp * dpdl);
            }
          }
        }
      });
}

/// Dual-output objective: focal(refined) + aux_weight * focal(coarse).
template <typename T>
Var<T> combined_loss(const Var<T>& refined_logits, const Var<T>& coarse_logits,
                     const Tensor<int32_t>& targets, const FocalParams& fp, double aux_weight,
                     std::optional<int32_t> ignore_index = std::nullopt) {
  if (aux_weight < 0)
    throw ParameterError("combined_loss: aux_weight must be >= 0, got " +
                         std::to_string(aux_weight));
  Var<T> main = focal_loss(refined_logits, targets, fp, ignore_index);
  if (aux_weight == 0) return main;
  Var<T> aux = focal_loss(coarse_logits, targets, fp, ignore_index);
  return add(main, scale(aux, static_cast<T>(aux_weight)));
}

}  // namespace ledcnet
