#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace loganmeta {

/// Dense row-major matrix of 64-bit reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorCode::ShapeMismatch, "matrix data length does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Rows gathered by index, in the given order.
  Matrix gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = row(indices[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                          const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw Error(ErrorCode::ShapeMismatch,
                what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                    ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

/// out = a * b + bias (broadcast over rows). Zero entries of `a` are skipped,
/// which makes the sparse tf-idf input layer cheap.
inline Matrix affine(const Matrix& a, const Matrix& b, std::span<const double> bias) {
  if (a.cols() != b.rows() || bias.size() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, "affine: inner dimensions disagree");
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    std::copy(bias.begin(), bias.end(), o);
    const auto ar = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = ar[k];
      if (s == 0.0) continue;
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

/// acc += a^T * g
inline void accumulate_at_b(const Matrix& a, const Matrix& g, Matrix& acc) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    const double* gr = g.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = ar[k];
      if (s == 0.0) continue;
      double* o = acc.row(k).data();
      for (std::size_t j = 0; j < g.cols(); ++j) o[j] += s * gr[j];
    }
  }
}

/// g * w^T
inline Matrix mul_bt(const Matrix& g, const Matrix& w) {
  Matrix out(g.rows(), w.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double* gr = g.row(i).data();
    for (std::size_t k = 0; k < w.rows(); ++k) {
      const double* wr = w.row(k).data();
      double s = 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j) s += gr[j] * wr[j];
      out(i, k) = s;
    }
  }
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace loganmeta
