#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace emu {

/// Dense row-major matrix of doubles. Biases and other vectors are stored as
/// 1 x n matrices so every parameter tensor shares one type.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(double value) noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Every kernel below accumulates each output element in ascending index
// order, so a row of a batched result is bit-identical to the same row
// computed alone.

/// a (n x k) * b (k x m)
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b and a * b^T without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// a + bias broadcast over rows; bias is 1 x cols.
Matrix add_row_vector(const Matrix& a, const Matrix& bias);
void add_row_vector_inplace(Matrix& a, const Matrix& bias);

/// 1 x cols matrix of column sums (rows accumulated top to bottom).
Matrix column_sums(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);

/// Columns of a followed by the columns of b.
Matrix concat_columns(const Matrix& a, const Matrix& b);
/// Columns [first, first + count) of a.
Matrix slice_columns(const Matrix& a, std::size_t first, std::size_t count);
/// Rows of a selected by index, in the given order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices);

double sum_of_squares(const Matrix& a) noexcept;

}  // namespace emu
