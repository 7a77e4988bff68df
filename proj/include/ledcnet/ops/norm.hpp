#pragma once

#include <cmath>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/cost.hpp"
#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

/// Layer normalization over the channel axis, applied independently at every
/// (batch, y, x) location, with per-channel affine parameters.
template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                           T eps = T(1e-6)) {
  require_rank(x->value, 4, "layer_norm input");
  const int64_t n = x->value.dim(0), c = x->value.dim(1);
  const int64_t h = x->value.dim(2), w = x->value.dim(3);
  if (gamma->value.numel() != c || beta->value.numel() != c)
    throw ShapeError("layer_norm: affine size != channel count");
  cost::record("layer_norm", {.elems = x->value.numel()});

  const int64_t plane = h * w;
  Tensor<T> y(x->value.shape());
  Tensor<T> mean({n, h, w});
  Tensor<T> inv_std({n, h, w});
  const T* xp = x->value.data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t s = 0; s < plane; ++s) {
      T mu = 0;
      for (int64_t ch = 0; ch < c; ++ch) mu += xp[(i * c + ch) * plane + s];
      mu /= static_cast<T>(c);
      T var = 0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T d = xp[(i * c + ch) * plane + s] - mu;
        var += d * d;
      }
      var /= static_cast<T>(c);
      const T is = T(1) / std::sqrt(var + eps);
      mean[i * plane + s] = mu;
      inv_std[i * plane + s] = is;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T xhat = (xp[(i * c + ch) * plane + s] - mu) * is;
        y.data()[(i * c + ch) * plane + s] = gamma->value[ch] * xhat + beta->value[ch];
      }
    }
  }

  return make_result<T>(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, mean = std::move(mean), inv_std = std::move(inv_std), n, c,
       plane](Node<T>& self) {
        const Tensor<T>& dy = self.grad;
        const T* xp = x->value.data();
        Tensor<T>* dgamma = gamma->requires_grad ? &gamma->ensure_grad() : nullptr;
        Tensor<T>* dbeta = beta->requires_grad ? &beta->ensure_grad() : nullptr;
        Tensor<T>* dx = x->requires_grad ? &x->ensure_grad() : nullptr;
        for (int64_t i = 0; i < n; ++i) {
          for (int64_t s = 0; s < plane; ++s) {
            const T mu = mean[i * plane + s];
            const T is = inv_std[i * plane + s];
            T sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (int64_t ch = 0; ch < c; ++ch) {
              const int64_t idx = (i * c + ch) * plane + s;
              const T xhat = (xp[idx] - mu) * is;
              const T g = dy[idx] * gamma->value[ch];
              sum_dxhat += g;
              sum_dxhat_xhat += g * xhat;
              if (dgamma) (*dgamma)[ch] += dy[idx] * xhat;
              if (dbeta) (*dbeta)[ch] += dy[idx];
            }
            if (dx) {
              const T inv_c = T(1) / static_cast<T>(c);
              for (int64_t ch = 0; ch < c; ++ch) {
                const int64_t idx = (i * c + ch) * plane + s;
                const T xhat = (xp[idx] - mu) * is;
                const T g = dy[idx] * gamma->value[ch];
                (*dx)[idx] += is * (g - inv_c * sum_dxhat - xhat * inv_c * sum_dxhat_xhat);
              }
            }
          }
        }
      });
}

/// Per-channel batch normalization over (batch, y, x). In training mode the
/// batch statistics normalize and the running estimates are updated with the
/// unbiased variance; in inference mode the running estimates normalize.
template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                    T momentum = T(0.1), T eps = T(1e-5)) {
  require_rank(x->value, 4, "batch_norm input");
  const int64_t n = x->value.dim(0), c = x->value.dim(1);
  const int64_t plane = x->value.dim(2) * x->value.dim(3);
  const int64_t m = n * plane;
  if (gamma->value.numel() != c || beta->value.numel() != c ||
      running_mean.numel() != c || running_var.numel() != c)
    throw ShapeError("batch_norm: parameter size != channel count");
  cost::record("batch_norm", {.elems = x->value.numel()});

  Tensor<T> y(x->value.shape());
  Tensor<T> mean({c});
  Tensor<T> inv_std({c});
  const T* xp = x->value.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    T mu, var;
    if (training) {
      mu = 0;
      for (int64_t i = 0; i < n; ++i) {
        const T* row = xp + (i * c + ch) * plane;
        for (int64_t s = 0; s < plane; ++s) mu += row[s];
      }
      mu /= static_cast<T>(m);
      var = 0;
      for (int64_t i = 0; i < n; ++i) {
        const T* row = xp + (i * c + ch) * plane;
        for (int64_t s = 0; s < plane; ++s) {
          const T d = row[s] - mu;
          var += d * d;
        }
      }
      var /= static_cast<T>(m);
      const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
      running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mu;
      running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * unbiased;
    } else {
      mu = running_mean[ch];
      var = running_var[ch];
    }
    const T is = T(1) / std::sqrt(var + eps);
    mean[ch] = mu;
    inv_std[ch] = is;
    for (int64_t i = 0; i < n; ++i) {
      const T* row = xp + (i * c + ch) * plane;
      T* out = y.data() + (i * c + ch) * plane;
      const T a = gamma->value[ch] * is;
      const T b = beta->value[ch] - a * mu;
      for (int64_t s = 0; s < plane; ++s) out[s] = a * row[s] + b;
    }
  }

  return make_result<T>(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, mean = std::move(mean), inv_std = std::move(inv_std), n, c, plane,
       training](Node<T>& self) {
        const Tensor<T>& dy = self.grad;
        const int64_t m = n * plane;
        const T* xp = x->value.data();
        Tensor<T>* dgamma = gamma->requires_grad ? &gamma->ensure_grad() : nullptr;
        Tensor<T>* dbeta = beta->requires_grad ? &beta->ensure_grad() : nullptr;
        Tensor<T>* dx = x->requires_grad ? &x->ensure_grad() : nullptr;
        for (int64_t ch = 0; ch < c; ++ch) {
          const T mu = mean[ch], is = inv_std[ch];
          T sum_dy = 0, sum_dy_xhat = 0;
          for (int64_t i = 0; i < n; ++i) {
            const T* row = xp + (i * c + ch) * plane;
            const T* gr = dy.data() + (i * c + ch) * plane;
            for (int64_t s = 0; s < plane; ++s) {
              sum_dy += gr[s];
              sum_dy_xhat += gr[s] * (row[s] - mu) * is;
            }
          }
          if (dgamma) (*dgamma)[ch] += sum_dy_xhat;
          if (dbeta) (*dbeta)[ch] += sum_dy;
          if (!dx) continue;
          const T g = gamma->value[ch];
          if (training) {
            const T inv_m = T(1) / static_cast<T>(m);
            for (int64_t i = 0; i < n; ++i) {
              const T* row = xp + (i * c + ch) * plane;
              const T* gr = dy.data() + (i * c + ch) * plane;
              T* out = dx->data() + (i * c + ch) * plane;
              for (int64_t s = 0; s < plane; ++s) {
                const T xhat = (row[s] - mu) * is;
                out[s] += g * is * (gr[s] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat);
              }
            }
          } else {
            for (int64_t i = 0; i < n; ++i) {
              const T* gr = dy.data() + (i * c + ch) * plane;
              T* out = dx->data() + (i * c + ch) * plane;
              for (int64_t s = 0; s < plane; ++s) out[s] += g * is * gr[s];
            }
          }
        }
      });
}

}  // namespace ledcnet
