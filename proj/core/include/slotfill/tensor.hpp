// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors in double precision and the scalar helpers that the
// rest of the library shares.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace slotfill {

using Shape = std::vector<std::size_t>;

/// Raised when a caller violates an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when NaN/Inf shows up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major dense tensor. Most of the library treats it as a matrix whose
/// first extent is the row count and whose remaining extents are flattened
/// into columns; a rank-1 tensor of length n is a 1 x n row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor(Shape{rows, cols}, std::move(data));
  }
  static Tensor scalar(double v) { return Tensor(Shape{1, 1}, std::vector<double>{v}); }
  static Tensor row(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 0 : (shape_.size() == 1 ? 1 : shape_[0]); }
  std::size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  double item() const;
  bool all_finite() const;
  void fill(double v);
  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// log(sum(exp(v))) with max subtraction. Throws PreconditionError on an
/// empty input.
double log_sum_exp(std::span<const double> v);

/// Counts zero-norm inputs seen by cosine_similarity; padded rows can be all
/// zero, so they produce similarity 0 instead of an error.
std::uint64_t zero_norm_cosine_count();
void reset_zero_norm_cosine_count();

/// a.b / (|a| |b|); 0 when either side has zero norm (the diagnostic counter
/// is bumped).
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

}  // namespace slotfill
