#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prospect/error.hpp"

namespace prospect {

/// Row-major dense matrix of doubles. Rows are samples, columns are features.
class Tensor2D {
 public:
  Tensor2D() = default;

  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    Tensor2D out(n, m);
    std::size_t r = 0;
    for (const auto& row : rows) {
      if (row.size() != m) throw ShapeError("ragged initializer for Tensor2D");
      std::copy(row.begin(), row.end(), out.row(r++).begin());
    }
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor2D select_rows(std::span<const std::size_t> indices) const {
    Tensor2D out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = row(indices[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  Tensor2D transposed() const {
    Tensor2D out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    }
    return out;
  }

  bool operator==(const Tensor2D&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_finite(const Tensor2D& t, std::string_view what) {
  if (!t.all_finite()) throw NonFiniteError("non-finite values in " + std::string(what));
}

/// out = a * b. The inner loop runs over contiguous rows of b.
inline Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Tensor2D out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* dst = out.row(r).data();
    const double* lhs = a.row(r).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = lhs[k];
      if (s == 0.0) continue;
      const double* rhs = b.row(k).data();
      for (std::size_t c = 0; c < n; ++c) dst[c] += s * rhs[c];
    }
  }
  return out;
}

/// out = a^T * b, accumulated row by row so no transpose is materialized.
inline Tensor2D matmul_transpose_lhs(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_transpose_lhs: row counts differ");
  Tensor2D out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* lhs = a.row(r).data();
    const double* rhs = b.row(r).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = lhs[k];
      if (s == 0.0) continue;
      double* dst = out.row(k).data();
      for (std::size_t c = 0; c < n; ++c) dst[c] += s * rhs[c];
    }
  }
  return out;
}

/// Column-wise concatenation [a, b].
inline Tensor2D hconcat(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows() != b.rows()) throw ShapeError("hconcat: row counts differ");
  Tensor2D out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

}  // namespace prospect
