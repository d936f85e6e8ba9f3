// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "w2vv/errors.hpp"

namespace w2vv {

/// Dense row-major matrix. Vectors are stored as `rows x 1`.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Tensor vector(std::size_t n) { return Tensor(n, 1); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  std::span<T> row(std::size_t r) noexcept { return flat().subspan(r * cols_, cols_); }
  std::span<const T> row(std::size_t r) const noexcept {
    return flat().subspan(r * cols_, cols_);
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), T{0}); }
  bool same_shape(const Tensor& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.flat().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
inline std::string shape_string(const Tensor<T>& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

// Dense kernels. Dot products accumulate in double regardless of T.

/// sum a[i] * b[i], four independent partial sums.
template <typename T>
inline double dot(const T* a, const T* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += double(a[i]) * double(b[i]);
    s1 += double(a[i + 1]) * double(b[i + 1]);
    s2 += double(a[i + 2]) * double(b[i + 2]);
    s3 += double(a[i + 3]) * double(b[i + 3]);
  }
  for (; i < n; ++i) s0 += double(a[i]) * double(b[i]);
  return (s0 + s1) + (s2 + s3);
}

/// y = W x + b
template <typename T>
void affine(const Tensor<T>& w, std::span<const T> x, const Tensor<T>& b,
            std::span<T> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    const double acc = dot(row.data(), x.data(), row.size());
    y[r] = static_cast<T>(acc + double(b[r]));
  }
}

/// y = W x + b, visiting only the listed nonzero columns of x.
template <typename T>
void affine_sparse(const Tensor<T>& w, std::span<const T> x,
                   std::span<const std::size_t> nonzero, const Tensor<T>& b,
                   std::span<T> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double acc = 0.0;
    for (std::size_t c : nonzero) acc += double(row[c]) * double(x[c]);
    y[r] = static_cast<T>(acc + double(b[r]));
  }
}

/// y += W x
template <typename T>
void matvec_add(const Tensor<T>& w, std::span<const T> x, std::span<T> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    const double acc = dot(row.data(), x.data(), row.size());
    y[r] = static_cast<T>(double(y[r]) + acc);
  }
}

/// dx += W^T dy
template <typename T>
void matvec_transposed_add(const Tensor<T>& w, std::span<const T> dy,
                           std::span<T> dx) {
  std::vector<double> acc(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const auto row = w.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) acc[c] += g * double(row[c]);
  }
  for (std::size_t c = 0; c < acc.size(); ++c)
    dx[c] = static_cast<T>(double(dx[c]) + acc[c]);
}

/// dW += dy x^T, restricted to nonzero columns of x.
template <typename T>
void outer_add(Tensor<T>& dw, std::span<const T> dy, std::span<const T> x,
               std::span<const std::size_t> nonzero) {
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    const T g = dy[r];
    if (g == T{0}) continue;
    auto row = dw.row(r);
    for (std::size_t c : nonzero) row[c] += g * x[c];
  }
}

template <typename T>
void outer_add(Tensor<T>& dw, std::span<const T> dy, std::span<const T> x) {
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    const T g = dy[r];
    if (g == T{0}) continue;
    auto row = dw.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += g * x[c];
  }
}

template <typename T>
std::vector<std::size_t> nonzero_indices(std::span<const T> x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != T{0}) idx.push_back(i);
  return idx;
}

}  // namespace w2vv
