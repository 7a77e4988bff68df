#pragma once

#include <cmath>
#include <vector>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/nn/layers.hpp"

namespace ledcnet {

/// AdamW: adaptive moments with decoupled weight decay
///   m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2
///   p <- p - lr * ( m_hat / (sqrt(v_hat) + eps) + wd * p )
template <typename T>
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
  };

  AdamW(const ParamList<T>& params, const Options& o) : opts_(o) {
    if (o.lr <= 0) throw ParameterError("adamw: lr must be positive");
    if (o.weight_decay < 0) throw ParameterError("adamw: weight_decay must be >= 0");
    for (const auto& p : params) {
      slots_.push_back({p.var, Tensor<double>(p.var->value.shape()),
                        Tensor<double>(p.var->value.shape())});
    }
  }

  double learning_rate() const { return opts_.lr; }
  void set_learning_rate(double lr) { opts_.lr = lr; }

  void zero_grad() {
    for (auto& s : slots_) s.param->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (auto& s : slots_) {
      if (s.param->grad.empty()) continue;
      Tensor<T>& p = s.param->value;
      const Tensor<T>& g = s.param->grad;
      for (int64_t i = 0; i < p.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        s.m[i] = opts_.beta1 * s.m[i] + (1.0 - opts_.beta1) * gi;
        s.v[i] = opts_.beta2 * s.v[i] + (1.0 - opts_.beta2) * gi * gi;
        const double mh = s.m[i] / bc1;
        const double vh = s.v[i] / bc2;
        const double update = mh / (std::sqrt(vh) + opts_.eps) +
                              opts_.weight_decay * static_cast<double>(p[i]);
        p[i] = static_cast<T>(static_cast<double>(p[i]) - opts_.lr * update);
      }
    }
  }

 private:
  struct Slot {
    Var<T> param;
    Tensor<double> m;
    Tensor<double> v;
  };
  Options opts_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

}  // namespace ledcnet
