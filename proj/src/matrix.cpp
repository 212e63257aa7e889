#include "gkcl/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace gkcl {

Matrix Matrix::filled(int r, int c, double v) {
  Matrix m(r, c);
  std::fill(m.data.begin(), m.data.end(), v);
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(int(rows.size()), rows.size() ? int(rows.begin()->size()) : 0);
  int r = 0;
  for (const auto& row : rows) {
    if (int(row.size()) != m.cols) throw DimensionError("from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row_ptr(r));
    ++r;
  }
  return m;
}

bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(const Matrix& m, const char* op) {
  if (!all_finite(m)) throw NumericError(std::string(op) + ": non-finite value produced");
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) throw DimensionError(std::string(op) + ": shape mismatch");
}

// Elementwise passes are safe to thread: every output element is computed
// independently, so results match the sequential pass bit for bit.
constexpr std::int64_t kParallelCutoff = 1 << 15;

}  // namespace

namespace {

// Accumulates out[i0..i1) += a[i0..i1, k0..k1) * b[k0..k1, :).  k is consumed
// four rows at a time with a fixed left-to-right summation order, so results
// do not depend on how row blocks are scheduled across threads.
void matmul_block(const Matrix& a, const Matrix& b, Matrix& out,
                  int i0, int i1, int k0, int k1) {
  const int N = b.cols;
  int k = k0;
  for (; k + 4 <= k1; k += 4) {
    const double* __restrict b0 = b.row_ptr(k);
    const double* __restrict b1 = b.row_ptr(k + 1);
    const double* __restrict b2 = b.row_ptr(k + 2);
    const double* __restrict b3 = b.row_ptr(k + 3);
    for (int i = i0; i < i1; ++i) {
      const double* arow = a.row_ptr(i);
      const double a0 = arow[k], a1 = arow[k + 1], a2 = arow[k + 2], a3 = arow[k + 3];
      double* __restrict orow = out.row_ptr(i);
      for (int j = 0; j < N; ++j)
        orow[j] = orow[j] + a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
  }
  for (; k < k1; ++k) {
    const double* __restrict brow = b.row_ptr(k);
    for (int i = i0; i < i1; ++i) {
      const double aik = a.at(i, k);
      double* __restrict orow = out.row_ptr(i);
      for (int j = 0; j < N; ++j) orow[j] += aik * brow[j];
    }
  }
}

}  // namespace

// Blocked i-k-j product. Every output element is accumulated in ascending-k
// order with a fixed association, so the OpenMP partition over row blocks is
// bit-identical to a single sequential pass.
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.rows) throw DimensionError("matmul: a.cols != b.rows");
  if (out.rows != a.rows || out.cols != b.cols)
    throw DimensionError("matmul_acc: output shape mismatch");
  const int M = a.rows, K = a.cols;
  constexpr int IB = 64, KB = 256;
  const int nblocks = (M + IB - 1) / IB;

#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < nblocks; ++bi) {
    const int i0 = bi * IB, i1 = std::min(i0 + IB, M);
    for (int k0 = 0; k0 < K; k0 += KB)
      matmul_block(a, b, out, i0, i1, k0, std::min(k0 + KB, K));
  }
  require_finite(out, "matmul");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: a.cols != b.rows");
  Matrix out(a.rows, b.cols);
  matmul_acc(a, b, out);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix out(a.rows, a.cols);
#pragma omp parallel for schedule(static) if(a.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  require_finite(out, "add");
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "sub");
  Matrix out(a.rows, a.cols);
#pragma omp parallel for schedule(static) if(a.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  require_finite(out, "sub");
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "hadamard");
  Matrix out(a.rows, a.cols);
#pragma omp parallel for schedule(static) if(a.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  require_finite(out, "hadamard");
  return out;
}

Matrix scale(const Matrix& m, double s) {
  Matrix out(m.rows, m.cols);
#pragma omp parallel for schedule(static) if(m.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < m.size(); ++i) out.data[i] = m.data[i] * s;
  require_finite(out, "scale");
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out(m.rows, m.cols);
#pragma omp parallel for schedule(static) if(m.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < m.size(); ++i) out.data[i] = m.data[i] > 0.0 ? m.data[i] : 0.0;
  return out;
}

Matrix exp_elem(const Matrix& m) {
  Matrix out(m.rows, m.cols);
#pragma omp parallel for schedule(static) if(m.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < m.size(); ++i) out.data[i] = std::exp(m.data[i]);
  require_finite(out, "exp");
  return out;
}

Matrix log_elem(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::int64_t i = 0; i < m.size(); ++i) {
    if (m.data[i] <= 0.0) throw DomainError("log: non-positive input");
    out.data[i] = std::log(m.data[i]);
  }
  return out;
}

Matrix sigmoid_elem(const Matrix& m) {
  Matrix out(m.rows, m.cols);
#pragma omp parallel for schedule(static) if (m.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < m.size(); ++i) {
    const double x = m.data[i];
    out.data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                           : std::exp(x) / (1.0 + std::exp(x));
  }
  return out;
}

Matrix pow_elem(const Matrix& m, double p) {
  Matrix out(m.rows, m.cols);
  for (std::int64_t i = 0; i < m.size(); ++i) out.data[i] = std::pow(m.data[i], p);
  require_finite(out, "pow");
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(c, r) = m.at(r, c);
  return out;
}

Matrix reduce_sum(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v;
  Matrix out(1, 1);
  out.data[0] = s;
  require_finite(out, "reduce_sum");
  return out;
}

Matrix reduce_mean(const Matrix& m) {
  if (m.size() == 0) throw DimensionError("reduce_mean: empty matrix");
  Matrix out = reduce_sum(m);
  out.data[0] /= double(m.size());
  return out;
}

Matrix row_sums(const Matrix& m) {
  Matrix out(m.rows, 1);
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* p = m.row_ptr(r);
    for (int c = 0; c < m.cols; ++c) s += p[c];
    out.data[r] = s;
  }
  require_finite(out, "row_sums");
  return out;
}

Matrix col_sums(const Matrix& m) {
  Matrix out(1, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const double* p = m.row_ptr(r);
    for (int c = 0; c < m.cols; ++c) out.data[c] += p[c];
  }
  require_finite(out, "col_sums");
  return out;
}

Matrix add_rowvec(const Matrix& m, const Matrix& v) {
  if (v.rows != 1 || v.cols != m.cols) throw DimensionError("add_rowvec: expected 1 x cols");
  Matrix out(m.rows, m.cols);
#pragma omp parallel for schedule(static) if (m.size() > kParallelCutoff)
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) + v.data[c];
  require_finite(out, "add_rowvec");
  return out;
}

Matrix add_colvec(const Matrix& m, const Matrix& v) {
  if (v.cols != 1 || v.rows != m.rows) throw DimensionError("add_colvec: expected rows x 1");
  Matrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) + v.data[r];
  require_finite(out, "add_colvec");
  return out;
}

Matrix mul_rowvec(const Matrix& m, const Matrix& v) {
  if (v.rows != 1 || v.cols != m.cols) throw DimensionError("mul_rowvec: expected 1 x cols");
  Matrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) * v.data[c];
  require_finite(out, "mul_rowvec");
  return out;
}

Matrix mul_colvec(const Matrix& m, const Matrix& v) {
  if (v.cols != 1 || v.rows != m.rows) throw DimensionError("mul_colvec: expected rows x 1");
  Matrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) * v.data[r];
  require_finite(out, "mul_colvec");
  return out;
}

Matrix row_softmax(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const double* in = m.row_ptr(r);
    double* o = out.row_ptr(r);
    double mx = in[0];
    for (int c = 1; c < m.cols; ++c) mx = std::max(mx, in[c]);
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      s += o[c];
    }
    for (int c = 0; c < m.cols; ++c) o[c] /= s;
  }
  return out;
}

Matrix l2_normalize_rows(const Matrix& m, double eps) {
  if (eps <= 0.0) throw ParameterError("l2_normalize_rows: eps must be > 0");
  Matrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const double* in = m.row_ptr(r);
    double* o = out.row_ptr(r);
    double sq = 0.0;
    for (int c = 0; c < m.cols; ++c) sq += in[c] * in[c];
    const double n = std::max(std::sqrt(sq), eps);
    for (int c = 0; c < m.cols; ++c) o[c] = in[c] / n;
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "max_abs_diff");
  double mx = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
  return mx;
}

}  // namespace gkcl
