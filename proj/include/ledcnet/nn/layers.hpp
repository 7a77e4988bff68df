#pragma once

#include <string>
#include <vector>

#include "ledcnet/core/autograd.hpp"
#include "ledcnet/core/random.hpp"
#include "ledcnet/ops/conv2d.hpp"
#include "ledcnet/ops/norm.hpp"
#include "ledcnet/ops/pointwise.hpp"

namespace ledcnet {

template <typename T>
struct ParamEntry {
  std::string name;
  Var<T> var;
};
template <typename T>
using ParamList = std::vector<ParamEntry<T>>;

template <typename T>
struct BufferEntry {
  std::string name;
  Tensor<T>* tensor;
};
template <typename T>
using BufferList = std::vector<BufferEntry<T>>;

struct ConvOptions {
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t dilation = 1;
  int64_t groups = 1;
  bool bias = true;
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(int64_t cin, int64_t cout, int64_t kernel, const ConvOptions& o, RandomSource& rng) {
    spec_.kh = spec_.kw = kernel;
    spec_.sh = spec_.sw = o.stride;
    spec_.ph = spec_.pw = o.padding;
    spec_.dh = spec_.dw = o.dilation;
    spec_.groups = o.groups;
    const int64_t fan_in = (cin / o.groups) * kernel * kernel;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor<T> w({cout, cin / o.groups, kernel, kernel});
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
    weight_ = make_param(std::move(w));
    if (o.bias) {
      Tensor<T> b({cout});
      for (int64_t i = 0; i < cout; ++i) b[i] = static_cast<T>(rng.uniform(-bound, bound));
      bias_ = make_param(std::move(b));
    }
  }

  Var<T> forward(const Var<T>& x) const { return conv2d(x, weight_, bias_, spec_); }
  Var<T> forward_dilated(const Var<T>& x, int64_t rate) const {
    return dilated_conv(x, weight_, bias_, rate);
  }

  const Conv2dSpec& spec() const { return spec_; }
  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", weight_});
    if (bias_) out.push_back({prefix + ".bias", bias_});
  }

 private:
  Conv2dSpec spec_;
  Var<T> weight_;
  Var<T> bias_;  // null when disabled
};

template <typename T>
class LayerNormChannels {
 public:
  LayerNormChannels() = default;
  explicit LayerNormChannels(int64_t channels)
      : gamma_(make_param(Tensor<T>::full({channels}, T(1)))),
        beta_(make_param(Tensor<T>({channels}))) {}

  Var<T> forward(const Var<T>& x) const { return layer_norm_channels(x, gamma_, beta_); }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

 private:
  Var<T> gamma_;
  Var<T> beta_;
};

template <typename T>
class BatchNorm2dLayer {
 public:
  BatchNorm2dLayer() = default;
  explicit BatchNorm2dLayer(int64_t channels)
      : gamma_(make_param(Tensor<T>::full({channels}, T(1)))),
        beta_(make_param(Tensor<T>({channels}))),
        running_mean_({channels}),
        running_var_(Tensor<T>::full({channels}, T(1))) {}

  Var<T> forward(const Var<T>& x) const {
    return batch_norm2d(x, gamma_, beta_, running_mean_, running_var_, training_);
  }

  void set_training(bool on) { training_ = on; }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }
  void collect_buffers(const std::string& prefix, BufferList<T>& out) {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
  }

 private:
  Var<T> gamma_;
  Var<T> beta_;
  mutable Tensor<T> running_mean_;
  mutable Tensor<T> running_var_;
  bool training_ = true;
};

/// 1x1 conv -> BN -> ReLU, the transformation stack used throughout the
/// decoder (no conv bias; the BN shift covers it).
template <typename T>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(int64_t cin, int64_t cout, int64_t kernel, RandomSource& rng, int64_t groups = 1)
      : conv_(cin, cout, kernel,
              {.padding = (kernel - 1) / 2, .groups = groups, .bias = false}, rng),
        bn_(cout) {}

  Var<T> forward(const Var<T>& x) const { return relu(bn_.forward(conv_.forward(x))); }
  Var<T> forward_dilated(const Var<T>& x, int64_t rate) const {
    return relu(bn_.forward(conv_.forward_dilated(x, rate)));
  }

  void set_training(bool on) { bn_.set_training(on); }
  void collect_params(const std::string& prefix, ParamList<T>& out) {
    conv_.collect_params(prefix + ".conv", out);
    bn_.collect_params(prefix + ".bn", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<T>& out) {
    bn_.collect_buffers(prefix + ".bn", out);
  }

 private:
  Conv2dLayer<T> conv_;
  BatchNorm2dLayer<T> bn_;
};

}  // namespace ledcnet
