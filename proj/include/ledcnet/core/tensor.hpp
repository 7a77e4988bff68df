#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ledcnet/core/errors.hpp"

namespace ledcnet {

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

/// Dense row-major tensor. The last axis is contiguous; a rank-4 tensor is
/// laid out as (batch, channel, height, width).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(check_numel(shape_), T(0)) {}
  Tensor(Shape shape, T fill_value)
      : shape_(std::move(shape)), data_(check_numel(shape_), fill_value) {}
  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }

  bool empty() const { return data_.empty(); }
  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // rank-4 accessor (n, c, h, w)
  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  // rank-3 accessor (n, h, w)
  T& at(int64_t n, int64_t h, int64_t w) {
    return data_[static_cast<size_t>((n * shape_[1] + h) * shape_[2] + w)];
  }
  const T& at(int64_t n, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>((n * shape_[1] + h) * shape_[2] + w)];
  }
  // rank-2 accessor (i, j)
  T& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  const T& at(int64_t i, int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Same storage reinterpreted under a new shape with equal element count.
  Tensor reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel())
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> v(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) v[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(v));
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  static int64_t check_numel(const Shape& s) {
    for (int64_t d : s)
      if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    return shape_numel(s);
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void require_rank(const Tensor<T>& t, int64_t r, const char* what) {
  if (t.rank() != r)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) +
                     ", got shape " + shape_str(t.shape()));
}

}  // namespace ledcnet
