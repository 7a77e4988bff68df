#pragma once

#include <cmath>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/cost.hpp"
#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

/// kxk average pooling with stride k. Output size is ceil(in/k); edge windows
/// average only the taps that exist, so size-1 maps survive the deep stages of
/// diagnostic inputs.
template <typename T>
Var<T> avg_pool2d(const Var<T>& x, int64_t k) {
  require_rank(x->value, 4, "avg_pool input");
  const int64_t n = x->value.dim(0), c = x->value.dim(1);
  const int64_t h = x->value.dim(2), w = x->value.dim(3);
  const int64_t ho = (h + k - 1) / k, wo = (w + k - 1) / k;
  cost::record("avg_pool2d", {.kh = k, .kw = k, .elems = n * c * ho * wo});
  Tensor<T> y({n, c, ho, wo});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* in = x->value.data() + (i * c + ch) * h * w;
      T* out = y.data() + (i * c + ch) * ho * wo;
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox) {
          const int64_t y0 = oy * k, x0 = ox * k;
          const int64_t y1 = std::min(y0 + k, h), x1 = std::min(x0 + k, w);
          T acc = 0;
          for (int64_t yy = y0; yy < y1; ++yy)
            for (int64_t xx = x0; xx < x1; ++xx) acc += in[yy * w + xx];
          out[oy * wo + ox] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
        }
    }
  return make_result<T>(std::move(y), {x}, [x, k, n, c, h, w, ho, wo](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& dx = x->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t ch = 0; ch < c; ++ch) {
        T* din = dx.data() + (i * c + ch) * h * w;
        const T* dout = self.grad.data() + (i * c + ch) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy)
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t y0 = oy * k, x0 = ox * k;
            const int64_t y1 = std::min(y0 + k, h), x1 = std::min(x0 + k, w);
            const T g = dout[oy * wo + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
            for (int64_t yy = y0; yy < y1; ++yy)
              for (int64_t xx = x0; xx < x1; ++xx) din[yy * w + xx] += g;
          }
      }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank(x->value, 4, "global_avg_pool input");
  const int64_t n = x->value.dim(0), c = x->value.dim(1);
  const int64_t plane = x->value.dim(2) * x->value.dim(3);
  cost::record("global_avg_pool", {.elems = x->value.numel()});
  Tensor<T> y({n, c, 1, 1});
  for (int64_t i = 0; i < n * c; ++i) {
    const T* in = x->value.data() + i * plane;
    T acc = 0;
    for (int64_t s = 0; s < plane; ++s) acc += in[s];
    y[i] = acc / static_cast<T>(plane);
  }
  return make_result<T>(std::move(y), {x}, [x, n, c, plane](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& dx = x->ensure_grad();
    for (int64_t i = 0; i < n * c; ++i) {
      const T g = self.grad[i] / static_cast<T>(plane);
      T* din = dx.data() + i * plane;
      for (int64_t s = 0; s < plane; ++s) din[s] += g;
    }
  });
}

namespace detail {
struct LerpTap {
  int64_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

inline LerpTap bilinear_tap(int64_t out_idx, int64_t in_size, int64_t out_size) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  double src = (static_cast<double>(out_idx) + 0.5) * scale - 0.5;
  if (src < 0) src = 0;
  const int64_t i0 = std::min<int64_t>(static_cast<int64_t>(src), in_size - 1);
  const int64_t i1 = std::min<int64_t>(i0 + 1, in_size - 1);
  return {i0, i1, src - static_cast<double>(i0)};
}
}  // namespace detail

/// Bilinear resize (align_corners = false). Identity when the size already
/// matches.
template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int64_t ho, int64_t wo) {
  require_rank(x->value, 4, "bilinear_resize input");
  const int64_t n = x->value.dim(0), c = x->value.dim(1);
  const int64_t h = x->value.dim(2), w = x->value.dim(3);
  if (ho == h && wo == w) return x;
  if (ho < 1 || wo < 1) throw ShapeError("bilinear_resize: target size must be positive");
  cost::record("bilinear_resize", {.elems = n * c * ho * wo});

  std::vector<detail::LerpTap> ty(static_cast<size_t>(ho)), tx(static_cast<size_t>(wo));
  for (int64_t i = 0; i < ho; ++i) ty[static_cast<size_t>(i)] = detail::bilinear_tap(i, h, ho);
  for (int64_t i = 0; i < wo; ++i) tx[static_cast<size_t>(i)] = detail::bilinear_tap(i, w, wo);

  Tensor<T> y({n, c, ho, wo});
  for (int64_t i = 0; i < n * c; ++i) {
    const T* in = x->value.data() + i * h * w;
    T* out = y.data() + i * ho * wo;
    for (int64_t oy = 0; oy < ho; ++oy) {
      const auto& a = ty[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < wo; ++ox) {
        const auto& b = tx[static_cast<size_t>(ox)];
        const double top = (1.0 - b.w1) * in[a.i0 * w + b.i0] + b.w1 * in[a.i0 * w + b.i1];
        const double bot = (1.0 - b.w1) * in[a.i1 * w + b.i0] + b.w1 * in[a.i1 * w + b.i1];
        out[oy * wo + ox] = static_cast<T>((1.0 - a.w1) * top + a.w1 * bot);
      }
    }
  }
  return make_result<T>(std::move(y), {x},
                        [x, ty = std::move(ty), tx = std::move(tx), n, c, h, w, ho,
                         wo](Node<T>& self) {
                          if (!x->requires_grad) return;
                          Tensor<T>& dx = x->ensure_grad();
                          for (int64_t i = 0; i < n * c; ++i) {
                            T* din = dx.data() + i * h * w;
                            const T* dout = self.grad.data() + i * ho * wo;
                            for (int64_t oy = 0; oy < ho; ++oy) {
                              const auto& a = ty[static_cast<size_t>(oy)];
                              for (int64_t ox = 0; ox < wo; ++ox) {
                                const auto& b = tx[static_cast<size_t>(ox)];
                                const double g = static_cast<double>(dout[oy * wo + ox]);
                                din[a.i0 * w + b.i0] += static_cast<T>((1 - a.w1) * (1 - b.w1) * g);
                                din[a.i0 * w + b.i1] += static_cast<T>((1 - a.w1) * b.w1 * g);
                                din[a.i1 * w + b.i0] += static_cast<T>(a.w1 * (1 - b.w1) * g);
                                din[a.i1 * w + b.i1] += static_cast<T>(a.w1 * b.w1 * g);
                              }
                            }
                          }
                        });
}

}  // namespace ledcnet
