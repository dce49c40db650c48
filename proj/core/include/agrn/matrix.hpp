#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace agrn {

/// Dense row-major matrix of doubles. Graphs here are small (tens of
/// nodes), so every graph-side quantity is stored densely.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  bool is_square() const { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Largest |a(i,j) - a(j,i)|; requires a square matrix.
double asymmetry(const Matrix& a);
bool is_symmetric(const Matrix& a, double tol);

/// Symmetric reordering: out(i, j) = a(order[i], order[j]).
Matrix permute_symmetric(const Matrix& a, std::span<const std::size_t> order);

}  // namespace agrn
