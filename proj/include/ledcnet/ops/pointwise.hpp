#pragma once

#include <cmath>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/cost.hpp"
#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

template <typename T>
Var<T> relu(const Var<T>& x) {
  cost::record("relu", {.elems = x->value.numel()});
  Tensor<T> y(x->value.shape());
  // NaN propagates so a diverged forward pass is visible at the loss
  for (int64_t i = 0; i < x->value.numel(); ++i) {
    const T v = x->value[i];
    y[i] = v > T(0) ? v : (std::isnan(static_cast<double>(v)) ? v : T(0));
  }
  return make_result<T>(std::move(y), {x}, [x](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& dx = x->ensure_grad();
    for (int64_t i = 0; i < dx.numel(); ++i)
      if (x->value[i] > T(0)) dx[i] += self.grad[i];
  });
}

/// Exact (erf-based) GELU.
template <typename T>
Var<T> gelu(const Var<T>& x) {
  cost::record("gelu", {.elems = x->value.numel()});
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  Tensor<T> y(x->value.shape());
  for (int64_t i = 0; i < x->value.numel(); ++i) {
    const double v = static_cast<double>(x->value[i]);
    y[i] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
  }
  return make_result<T>(std::move(y), {x}, [x](Node<T>& self) {
    if (!x->requires_grad) return;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    Tensor<T>& dx = x->ensure_grad();
    for (int64_t i = 0; i < dx.numel(); ++i) {
      const double v = static_cast<double>(x->value[i]);
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      dx[i] += self.grad[i] * static_cast<T>(cdf + v * pdf);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError("add: shape mismatch " + shape_str(a->value.shape()) + " vs " +
                     shape_str(b->value.shape()));
  cost::record("add", {.elems = a->value.numel()});
  Tensor<T> y(a->value.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = a->value[i] + b->value[i];
  return make_result<T>(std::move(y), {a, b}, [a, b](Node<T>& self) {
    for (const auto& p : {a, b}) {
      if (!p->requires_grad) continue;
      Tensor<T>& dp = p->ensure_grad();
      for (int64_t i = 0; i < dp.numel(); ++i) dp[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  cost::record("scale", {.elems = x->value.numel()});
  Tensor<T> y(x->value.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = x->value[i] * factor;
  return make_result<T>(std::move(y), {x}, [x, factor](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& dx = x->ensure_grad();
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i] * factor;
  });
}

/// Concatenation along the channel axis of rank-4 tensors.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ParameterError("concat_channels: empty input list");
  const int64_t n = xs[0]->value.dim(0);
  const int64_t h = xs[0]->value.dim(2), w = xs[0]->value.dim(3);
  int64_t ctot = 0;
  for (const auto& x : xs) {
    require_rank(x->value, 4, "concat input");
    if (x->value.dim(0) != n || x->value.dim(2) != h || x->value.dim(3) != w)
      throw ShapeError("concat_channels: mismatched shape " + shape_str(x->value.shape()));
    ctot += x->value.dim(1);
  }
  const int64_t plane = h * w;
  Tensor<T> y({n, ctot, h, w});
  for (int64_t i = 0; i < n; ++i) {
    int64_t coff = 0;
    for (const auto& x : xs) {
      const int64_t c = x->value.dim(1);
      std::copy(x->value.data() + i * c * plane, x->value.data() + (i + 1) * c * plane,
                y.data() + (i * ctot + coff) * plane);
      coff += c;
    }
  }
  return make_result<T>(std::move(y), xs, [xs, n, ctot, plane](Node<T>& self) {
    for (int64_t i = 0; i < n; ++i) {
      int64_t coff = 0;
      for (const auto& x : xs) {
        const int64_t c = x->value.dim(1);
        if (x->requires_grad) {
          Tensor<T>& dx = x->ensure_grad();
          const T* src = self.grad.data() + (i * ctot + coff) * plane;
          T* dst = dx.data() + i * c * plane;
          for (int64_t j = 0; j < c * plane; ++j) dst[j] += src[j];
        }
        coff += c;
      }
    }
  });
}

}  // namespace ledcnet
