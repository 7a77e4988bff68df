#pragma once

#include <Eigen/Core>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/cost.hpp"
#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

struct Conv2dSpec {
  int64_t kh = 1, kw = 1;
  int64_t sh = 1, sw = 1;
  int64_t ph = 0, pw = 0;
  int64_t dh = 1, dw = 1;
  int64_t groups = 1;
};

namespace detail {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t s, int64_t p, int64_t d) {
  return (in + 2 * p - d * (k - 1) - 1) / s + 1;
}

/// Unfolds one (sample, group) slab into a (Cg*kh*kw) x (Hout*Wout) matrix.
template <typename T>
void im2col(const T* x, int64_t channels, int64_t h, int64_t w, const Conv2dSpec& s,
            int64_t hout, int64_t wout, T* col) {
  const int64_t plane = h * w;
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ky = 0; ky < s.kh; ++ky) {
      for (int64_t kx = 0; kx < s.kw; ++kx) {
        T* row = col + ((c * s.kh + ky) * s.kw + kx) * hout * wout;
        for (int64_t oy = 0; oy < hout; ++oy) {
          const int64_t iy = oy * s.sh - s.ph + ky * s.dh;
          T* dst = row + oy * wout;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wout, T(0));
            continue;
          }
          const T* src = x + c * plane + iy * w;
          if (s.sw == 1) {
            const int64_t base = -s.pw + kx * s.dw;
            int64_t lo = std::max<int64_t>(0, -base);
            int64_t hi = std::min<int64_t>(wout, w - base);
            if (lo > hi) lo = hi = 0;
            std::fill(dst, dst + lo, T(0));
            if (hi > lo) std::copy(src + base + lo, src + base + hi, dst + lo);
            std::fill(dst + std::max(lo, hi), dst + wout, T(0));
          } else {
            for (int64_t ox = 0; ox < wout; ++ox) {
              const int64_t ix = ox * s.sw - s.pw + kx * s.dw;
              dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

/// Transpose of im2col: scatter-adds a column matrix back onto the input slab.
template <typename T>
void col2im_add(const T* col, int64_t channels, int64_t h, int64_t w, const Conv2dSpec& s,
                int64_t hout, int64_t wout, T* x) {
  const int64_t plane = h * w;
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ky = 0; ky < s.kh; ++ky) {
      for (int64_t kx = 0; kx < s.kw; ++kx) {
        const T* row = col + ((c * s.kh + ky) * s.kw + kx) * hout * wout;
        for (int64_t oy = 0; oy < hout; ++oy) {
          const int64_t iy = oy * s.sh - s.ph + ky * s.dh;
          if (iy < 0 || iy >= h) continue;
          T* dst = x + c * plane + iy * w;
          const T* src = row + oy * wout;
          for (int64_t ox = 0; ox < wout; ++ox) {
            const int64_t ix = ox * s.sw - s.pw + kx * s.dw;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const Conv2dSpec& s) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0);
  if (s.groups < 1 || cin % s.groups != 0 || cout % s.groups != 0)
    throw ShapeError("conv2d: channels " + std::to_string(cin) + "->" + std::to_string(cout) +
                     " not divisible by groups " + std::to_string(s.groups));
  const int64_t cg = cin / s.groups, og = cout / s.groups;
  if (w.dim(1) != cg || w.dim(2) != s.kh || w.dim(3) != s.kw)
    throw ShapeError("conv2d: weight shape " + shape_str(w.shape()) + " does not match spec");
  const int64_t hout = detail::conv_out_dim(h, s.kh, s.sh, s.ph, s.dh);
  const int64_t wout = detail::conv_out_dim(wd, s.kw, s.sw, s.pw, s.dw);
  if (hout < 1 || wout < 1)
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " too small for kernel");
  if (bias && bias->numel() != cout)
    throw ShapeError("conv2d: bias size " + std::to_string(bias->numel()) + " != " +
                     std::to_string(cout));

  cost::record("conv2d", {.kh = s.kh, .kw = s.kw, .cin = cin, .cout = cout, .hout = hout,
                          .wout = wout, .groups = s.groups});

  Tensor<T> y({n, cout, hout, wout});
  const int64_t kk = cg * s.kh * s.kw;
  const int64_t hw = hout * wout;
  std::vector<T> col(static_cast<size_t>(kk * hw));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t g = 0; g < s.groups; ++g) {
      detail::im2col(x.data() + (i * cin + g * cg) * h * wd, cg, h, wd, s, hout, wout,
                     col.data());
      detail::ConstMatMap<T> wm(w.data() + g * og * kk, og, kk);
      detail::ConstMatMap<T> cm(col.data(), kk, hw);
      detail::MatMap<T> ym(y.data() + (i * cout + g * og) * hw, og, hw);
      ym.noalias() = wm * cm;
    }
    if (bias) {
      for (int64_t c = 0; c < cout; ++c) {
        T* row = y.data() + (i * cout + c) * hw;
        const T b = bias->data()[c];
        for (int64_t j = 0; j < hw; ++j) row[j] += b;
      }
    }
  }
  return y;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, const Conv2dSpec& s) {
  Tensor<T> y = conv2d_forward(x->value, w->value, bias ? &bias->value : nullptr, s);
  std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{x, w, bias}
                                     : std::vector<Var<T>>{x, w};
  return make_result<T>(std::move(y), std::move(parents), [x, w, bias, s](Node<T>& self) {
    const Tensor<T>& dy = self.grad;
    const int64_t n = x->value.dim(0), cin = x->value.dim(1);
    const int64_t h = x->value.dim(2), wd = x->value.dim(3);
    const int64_t cout = w->value.dim(0);
    const int64_t cg = cin / s.groups, og = cout / s.groups;
    const int64_t hout = dy.dim(2), wout = dy.dim(3);
    const int64_t kk = cg * s.kh * s.kw, hw = hout * wout;

    if (bias && bias->requires_grad) {
      Tensor<T>& db = bias->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < cout; ++c) {
          const T* row = dy.data() + (i * cout + c) * hw;
          T acc = 0;
          for (int64_t j = 0; j < hw; ++j) acc += row[j];
          db[c] += acc;
        }
    }
    const bool need_dx = x->requires_grad;
    const bool need_dw = w->requires_grad;
    if (!need_dx && !need_dw) return;
    if (need_dx) x->ensure_grad();
    if (need_dw) w->ensure_grad();

    std::vector<T> col(static_cast<size_t>(kk * hw));
    std::vector<T> dcol(need_dx ? static_cast<size_t>(kk * hw) : 0);
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t g = 0; g < s.groups; ++g) {
        detail::ConstMatMap<T> dym(dy.data() + (i * cout + g * og) * hw, og, hw);
        if (need_dw) {
          detail::im2col(x->value.data() + (i * cin + g * cg) * h * wd, cg, h, wd, s, hout,
                         wout, col.data());
          detail::ConstMatMap<T> cm(col.data(), kk, hw);
          detail::MatMap<T> dwm(w->grad.data() + g * og * kk, og, kk);
          dwm.noalias() += dym * cm.transpose();
        }
        if (need_dx) {
          detail::ConstMatMap<T> wm(w->value.data() + g * og * kk, og, kk);
          detail::MatMap<T> dcm(dcol.data(), kk, hw);
          dcm.noalias() = wm.transpose() * dym;
          detail::col2im_add(dcol.data(), cg, h, wd, s, hout, wout,
                             x->grad.data() + (i * cin + g * cg) * h * wd);
        }
      }
    }
  });
}

/// Dilated convolution with same-padding r*(k-1)/2, following the hole-rate
/// formulation y[i] = sum_k x[i + r*k] * w[k]. r = 1 degenerates to a plain
/// convolution.
template <typename T>
Var<T> dilated_conv(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int64_t r) {
  if (r < 1) throw ParameterError("dilated_conv: rate must be >= 1, got " + std::to_string(r));
  require_rank(w->value, 4, "dilated_conv weight");
  const int64_t kh = w->value.dim(2), kw = w->value.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw ParameterError("dilated_conv: kernel sides must be odd, got " + std::to_string(kh) +
                         "x" + std::to_string(kw));
  Conv2dSpec s;
  s.kh = kh;
  s.kw = kw;
  s.dh = r;
  s.dw = r;
  s.ph = r * (kh - 1) / 2;
  s.pw = r * (kw - 1) / 2;
  return conv2d(x, w, bias, s);
}

}  // namespace ledcnet
