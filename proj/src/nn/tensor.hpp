#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "common.hpp"

namespace gp::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Dense row-major array. T is float for training, double for verification.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T{0}); }

  void reshape(Shape s) {
    if (shape_size(s) != data_.size()) throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(s));
    shape_ = std::move(s);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool operator==(const Tensor&) const = default;

  void check_same(const Tensor& o) const {
    if (shape_ != o.shape_) throw ShapeError("shape mismatch: " + shape_string(shape_) + " vs " + shape_string(o.shape_));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
MatMap<T> as_matrix(T* data, std::size_t rows, std::size_t cols) {
  return MatMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <typename T>
ConstMatMap<T> as_matrix(const T* data, std::size_t rows, std::size_t cols) {
  return ConstMatMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

/// Views a rank-2 tensor (or any tensor as rows x last-dim) as a matrix.
template <typename T>
MatMap<T> as_matrix(Tensor<T>& t) {
  const std::size_t cols = t.shape().back();
  return as_matrix(t.data(), t.size() / cols, cols);
}
template <typename T>
ConstMatMap<T> as_matrix(const Tensor<T>& t) {
  const std::size_t cols = t.shape().back();
  return as_matrix(t.data(), t.size() / cols, cols);
}

namespace detail {

// Splits `shape` around `axis` into (outer, extent, inner) strides.
inline void split_axis(const Shape& shape, std::size_t axis, std::size_t& outer, std::size_t& extent,
                       std::size_t& inner) {
  if (axis >= shape.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  extent = shape[axis];
  if (extent == 0) throw ShapeError("reduction over an empty axis");
  outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace detail

/// log Σ exp over a contiguous range, with max subtraction.
template <typename T>
T logsumexp(std::span<const T> v) {
  if (v.empty()) throw ShapeError("logsumexp over an empty range");
  const T m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<T>::infinity()) return m;
  T s = 0;
  for (T x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Reduces `axis` away.
template <typename T>
Tensor<T> logsumexp(const Tensor<T>& v, std::size_t axis) {
  std::size_t outer, extent, inner;
  detail::split_axis(v.shape(), axis, outer, extent, inner);
  Shape out_shape = v.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(out_shape);
  std::vector<T> buf(extent);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      for (std::size_t e = 0; e < extent; ++e) buf[e] = v[(o * extent + e) * inner + i];
      out[o * inner + i] = logsumexp<T>(buf);
    }
  }
  return out;
}

/// In-place softmax over a contiguous range.
template <typename T>
void softmax_inplace(std::span<T> v) {
  if (v.empty()) throw ShapeError("softmax over an empty range");
  const T m = *std::max_element(v.begin(), v.end());
  T s = 0;
  for (T& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (T& x : v) x /= s;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& v, std::size_t axis) {
  std::size_t outer, extent, inner;
  detail::split_axis(v.shape(), axis, outer, extent, inner);
  Tensor<T> out(v.shape());
  std::vector<T> buf(extent);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      for (std::size_t e = 0; e < extent; ++e) buf[e] = v[(o * extent + e) * inner + i];
      softmax_inplace<T>(buf);
      for (std::size_t e = 0; e < extent; ++e) out[(o * extent + e) * inner + i] = buf[e];
    }
  }
  return out;
}

}  // namespace gp::nn
