#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "gkcl/errors.hpp"

namespace gkcl {

// Dense real64 matrix, row-major. data.size() == rows*cols always.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {
    if (r < 0 || c < 0) throw DimensionError("Matrix: negative dimension");
  }
  Matrix(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != std::size_t(r) * c)
      throw DimensionError("Matrix: data length does not match rows*cols");
  }

  static Matrix filled(int r, int c, double v);
  static Matrix identity(int n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[std::size_t(r) * cols + c]; }
  double* row_ptr(int r) { return data.data() + std::size_t(r) * cols; }
  const double* row_ptr(int r) const { return data.data() + std::size_t(r) * cols; }

  std::int64_t size() const { return std::int64_t(rows) * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

bool all_finite(const Matrix& m);
// Throws NumericError naming `op` if m contains NaN/Inf.
void require_finite(const Matrix& m, const char* op);

Matrix matmul(const Matrix& a, const Matrix& b);
// out += a*b without allocating; shapes must already agree.
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
Matrix relu(const Matrix& m);
Matrix exp_elem(const Matrix& m);
Matrix log_elem(const Matrix& m);     // throws DomainError on non-positive entries
Matrix sigmoid_elem(const Matrix& m);
Matrix pow_elem(const Matrix& m, double p);
Matrix transpose(const Matrix& m);

Matrix reduce_sum(const Matrix& m);   // 1x1
Matrix reduce_mean(const Matrix& m);  // 1x1
Matrix row_sums(const Matrix& m);     // rows x 1
Matrix col_sums(const Matrix& m);     // 1 x cols

// Broadcast a 1 x cols row vector / rows x 1 column vector over m.
Matrix add_rowvec(const Matrix& m, const Matrix& v);
Matrix add_colvec(const Matrix& m, const Matrix& v);
Matrix mul_rowvec(const Matrix& m, const Matrix& v);
Matrix mul_colvec(const Matrix& m, const Matrix& v);

// Max-subtracted softmax per row; rows sum to 1.
Matrix row_softmax(const Matrix& m);
// Each row scaled to unit Euclidean norm; rows with norm < eps divide by eps
// instead, so an all-zero row stays zero.
Matrix l2_normalize_rows(const Matrix& m, double eps = 1e-12);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace gkcl
