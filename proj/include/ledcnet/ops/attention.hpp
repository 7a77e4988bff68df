#pragma once

#include <cmath>
#include <memory>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/cost.hpp"
#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

/// Softmax attention over flattened key/value sets.
///   queries (N, d, Hq, Wq), keys (N, d, Hk, Wk), values (N, c, Hk, Wk)
///   scores_ij = scale * q_i . k_j ; weights = row softmax ; out_i = sum_j w_ij v_j
/// Output is (N, c, Hq, Wq). The row-stochastic weight matrix (N, Nq, Nkv) is
/// written to *weights_out when given (useful for inspecting the pixel-region
/// relation).
template <typename T>
Var<T> softmax_attention(const Var<T>& queries, const Var<T>& keys, const Var<T>& values,
                         double scale, std::shared_ptr<Tensor<T>> weights_out = nullptr) {
  require_rank(queries->value, 4, "attention queries");
  require_rank(keys->value, 4, "attention keys");
  require_rank(values->value, 4, "attention values");
  const int64_t n = queries->value.dim(0);
  const int64_t d = queries->value.dim(1);
  const int64_t nq = queries->value.dim(2) * queries->value.dim(3);
  const int64_t nkv = keys->value.dim(2) * keys->value.dim(3);
  const int64_t c = values->value.dim(1);
  if (keys->value.dim(0) != n || values->value.dim(0) != n)
    throw ShapeError("attention: batch mismatch");
  if (keys->value.dim(1) != d)
    throw ShapeError("attention: key depth " + std::to_string(keys->value.dim(1)) +
                     " != query depth " + std::to_string(d));
  if (values->value.dim(2) * values->value.dim(3) != nkv)
    throw ShapeError("attention: key/value count mismatch");
  cost::record("attention", {.d = d, .nq = n * nq, .nkv = nkv, .channels = c});

  // weights[n][i][j]
  Tensor<T> weights({n, nq, nkv});
  const T* qp = queries->value.data();
  const T* kp = keys->value.data();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t i = 0; i < nq; ++i) {
      T* row = weights.data() + (b * nq + i) * nkv;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t j = 0; j < nkv; ++j) {
        T dot = 0;
        for (int64_t t = 0; t < d; ++t) dot += qp[(b * d + t) * nq + i] * kp[(b * d + t) * nkv + j];
        row[j] = static_cast<T>(scale) * dot;
        mx = std::max(mx, row[j]);
      }
      T z = 0;
      for (int64_t j = 0; j < nkv; ++j) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      }
      for (int64_t j = 0; j < nkv; ++j) row[j] /= z;
    }
  }
  if (weights_out) *weights_out = weights;

  Tensor<T> y({n, c, queries->value.dim(2), queries->value.dim(3)});
  const T* vp = values->value.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < nq; ++i) {
        const T* row = weights.data() + (b * nq + i) * nkv;
        T acc = 0;
        for (int64_t j = 0; j < nkv; ++j) acc += row[j] * vp[(b * c + ch) * nkv + j];
        y.data()[(b * c + ch) * nq + i] = acc;
      }

  return make_result<T>(
      std::move(y), {queries, keys, values},
      [queries, keys, values, weights = std::move(weights), scale, n, d, nq, nkv,
       c](Node<T>& self) {
        const Tensor<T>& dy = self.grad;
        const T* qp = queries->value.data();
        const T* kp = keys->value.data();
        const T* vp = values->value.data();
        Tensor<T>* dq = queries->requires_grad ? &queries->ensure_grad() : nullptr;
        Tensor<T>* dk = keys->requires_grad ? &keys->ensure_grad() : nullptr;
        Tensor<T>* dv = values->requires_grad ? &values->ensure_grad() : nullptr;
        std::vector<T> dw(static_cast<size_t>(nkv));
        std::vector<T> dl(static_cast<size_t>(nkv));
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t i = 0; i < nq; ++i) {
            const T* wrow = weights.data() + (b * nq + i) * nkv;
            // dV and dW
            for (int64_t j = 0; j < nkv; ++j) {
              T acc = 0;
              for (int64_t ch = 0; ch < c; ++ch)
                acc += dy.data()[(b * c + ch) * nq + i] * vp[(b * c + ch) * nkv + j];
              dw[static_cast<size_t>(j)] = acc;
            }
            if (dv) {
              for (int64_t ch = 0; ch < c; ++ch) {
                const T g = dy.data()[(b * c + ch) * nq + i];
                T* dvrow = dv->data() + (b * c + ch) * nkv;
                for (int64_t j = 0; j < nkv; ++j) dvrow[j] += g * wrow[j];
              }
            }
            if (!dq && !dk) continue;
            // softmax backward: dl_j = w_j * (dw_j - sum_k dw_k w_k)
            T dot = 0;
            for (int64_t j = 0; j < nkv; ++j) dot += dw[static_cast<size_t>(j)] * wrow[j];
            for (int64_t j = 0; j < nkv; ++j)
              dl[static_cast<size_t>(j)] = wrow[j] * (dw[static_cast<size_t>(j)] - dot);
            for (int64_t j = 0; j < nkv; ++j) {
              const T g = static_cast<T>(scale) * dl[static_cast<size_t>(j)];
              if (g == T(0)) continue;
              for (int64_t t = 0; t < d; ++t) {
                if (dq) dq->data()[(b * d + t) * nq + i] += g * kp[(b * d + t) * nkv + j];
                if (dk) dk->data()[(b * d + t) * nkv + j] += g * qp[(b * d + t) * nq + i];
              }
            }
          }
        }
      });
}

/// Plain-tensor scaled dot-product attention on a single sample, in the
/// matrix layout Q (d, Nq), K (d, Nkv), V (c, Nkv) -> (c, Nq) with the
/// 1/sqrt(d) temperature.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               Tensor<T>* weights_out = nullptr) {
  require_rank(q, 2, "scaled_dot_attention Q");
  require_rank(k, 2, "scaled_dot_attention K");
  require_rank(v, 2, "scaled_dot_attention V");
  if (q.dim(0) != k.dim(0))
    throw ShapeError("scaled_dot_attention: depth mismatch " + std::to_string(q.dim(0)) +
                     " vs " + std::to_string(k.dim(0)));
  if (k.dim(1) != v.dim(1))
    throw ShapeError("scaled_dot_attention: key count != value count");
  const int64_t d = q.dim(0);
  NoGradGuard ng;
  auto qa = make_leaf(q.reshaped({1, d, q.dim(1), 1}));
  auto ka = make_leaf(k.reshaped({1, d, k.dim(1), 1}));
  auto va = make_leaf(v.reshaped({1, v.dim(0), v.dim(1), 1}));
  std::shared_ptr<Tensor<T>> w;
  if (weights_out) w = std::make_shared<Tensor<T>>();
  auto out = softmax_attention(qa, ka, va, 1.0 / std::sqrt(static_cast<double>(d)), w);
  if (weights_out) *weights_out = w->reshaped({q.dim(1), k.dim(1)});
  return out->value.reshaped({v.dim(0), q.dim(1)});
}

/// Soft-region aggregation: weights each region's spatial softmax over the
/// pixel features.
///   pixels (N, C, H, W), region_logits (N, K, H, W) -> reps (N, C, K, 1)
///   reps[n,:,k] = sum_s softmax_s(region_logits[n,k,:])_s * pixels[n,:,s]
template <typename T>
Var<T> region_aggregate(const Var<T>& pixels, const Var<T>& region_logits,
                        std::shared_ptr<Tensor<T>> softmax_out = nullptr) {
  require_rank(pixels->value, 4, "region_aggregate pixels");
  require_rank(region_logits->value, 4, "region_aggregate logits");
  const int64_t n = pixels->value.dim(0), c = pixels->value.dim(1);
  const int64_t hw = pixels->value.dim(2) * pixels->value.dim(3);
  const int64_t k = region_logits->value.dim(1);
  if (region_logits->value.dim(0) != n ||
      region_logits->value.dim(2) * region_logits->value.dim(3) != hw)
    throw ShapeError("region_aggregate: logits shape " +
                     shape_str(region_logits->value.shape()) + " does not match pixels " +
                     shape_str(pixels->value.shape()));
  cost::record("region_aggregate", {.nq = n * hw, .nkv = k, .channels = c});

  Tensor<T> soft({n, k, hw});  // spatial softmax per region
  const T* lp = region_logits->value.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t r = 0; r < k; ++r) {
      const T* row = lp + (b * k + r) * hw;
      T* out = soft.data() + (b * k + r) * hw;
      T mx = row[0];
      for (int64_t s = 1; s < hw; ++s) mx = std::max(mx, row[s]);
      T z = 0;
      for (int64_t s = 0; s < hw; ++s) {
        out[s] = std::exp(row[s] - mx);
        z += out[s];
      }
      for (int64_t s = 0; s < hw; ++s) out[s] /= z;
    }
  if (softmax_out) *softmax_out = soft;

  Tensor<T> reps({n, c, k, 1});
  const T* pp = pixels->value.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t r = 0; r < k; ++r) {
        const T* srow = soft.data() + (b * k + r) * hw;
        const T* prow = pp + (b * c + ch) * hw;
        T acc = 0;
        for (int64_t s = 0; s < hw; ++s) acc += srow[s] * prow[s];
        reps.data()[(b * c + ch) * k + r] = acc;
      }

  return make_result<T>(
      std::move(reps), {pixels, region_logits},
      [pixels, region_logits, soft = std::move(soft), n, c, hw, k](Node<T>& self) {
        const Tensor<T>& dreps = self.grad;
        const T* pp = pixels->value.data();
        Tensor<T>* dpix = pixels->requires_grad ? &pixels->ensure_grad() : nullptr;
        Tensor<T>* dlog = region_logits->requires_grad ? &region_logits->ensure_grad() : nullptr;
        std::vector<T> dsoft(static_cast<size_t>(hw));
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t r = 0; r < k; ++r) {
            const T* srow = soft.data() + (b * k + r) * hw;
            if (dpix) {
              for (int64_t ch = 0; ch < c; ++ch) {
                const T g = dreps.data()[(b * c + ch) * k + r];
                if (g == T(0)) continue;
                T* drow = dpix->data() + (b * c + ch) * hw;
                for (int64_t s = 0; s < hw; ++s) drow[s] += g * srow[s];
              }
            }
            if (dlog) {
              std::fill(dsoft.begin(), dsoft.end(), T(0));
              for (int64_t ch = 0; ch < c; ++ch) {
                const T g = dreps.data()[(b * c + ch) * k + r];
                if (g == T(0)) continue;
                const T* prow = pp + (b * c + ch) * hw;
                for (int64_t s = 0; s < hw; ++s) dsoft[static_cast<size_t>(s)] += g * prow[s];
              }
              T dot = 0;
              for (int64_t s = 0; s < hw; ++s) dot += dsoft[static_cast<size_t>(s)] * srow[s];
              T* drow = dlog->data() + (b * k + r) * hw;
              for (int64_t s = 0; s < hw; ++s)
                drow[s] += srow[s] * (dsoft[static_cast<size_t>(s)] - dot);
            }
          }
        }
      });
}

}  // namespace ledcnet
