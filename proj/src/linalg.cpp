#include "gkcl/linalg.hpp"

#include <cmath>
#include <string>

namespace gkcl {

Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw DimensionError("cholesky: matrix not square");
  const int n = a.rows;
  Matrix L(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a.at(j, j);
    const double* lj = L.row_ptr(j);
    for (int k = 0; k < j; ++k) d -= lj[k] * lj[k];
    if (!(d > 0.0) || !std::isfinite(d))
      throw FactorizationError(j, "cholesky: non-positive pivot at index " + std::to_string(j));
    const double ljj = std::sqrt(d);
    L.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a.at(i, j);
      const double* li = L.row_ptr(i);
      for (int k = 0; k < j; ++k) s -= li[k] * lj[k];
      L.at(i, j) = s / ljj;
    }
  }
  return L;
}

Matrix chol_solve(const Matrix& L, const Matrix& b) {
  if (L.rows != L.cols) throw DimensionError("chol_solve: factor not square");
  if (b.rows != L.rows) throw DimensionError("chol_solve: rhs row mismatch");
  const int n = L.rows, m = b.cols;
  // forward substitution L y = b
  Matrix y(n, m);
  for (int i = 0; i < n; ++i) {
    const double* li = L.row_ptr(i);
    for (int c = 0; c < m; ++c) {
      double s = b.at(i, c);
      for (int k = 0; k < i; ++k) s -= li[k] * y.at(k, c);
      y.at(i, c) = s / li[i];
    }
  }
  // back substitution L^T x = y
  Matrix x(n, m);
  for (int i = n - 1; i >= 0; --i) {
    for (int c = 0; c < m; ++c) {
      double s = y.at(i, c);
      for (int k = i + 1; k < n; ++k) s -= L.at(k, i) * x.at(k, c);
      x.at(i, c) = s / L.at(i, i);
    }
  }
  require_finite(x, "chol_solve");
  return x;
}

namespace {

Matrix spd_factor(const Matrix& a, bool jitter_allowed) {
  try {
    return cholesky(a);
  } catch (const FactorizationError&) {
    if (!jitter_allowed) throw;
  }
  double trace = 0.0;
  for (int i = 0; i < a.rows; ++i) trace += a.at(i, i);
  Matrix aj = a;
  const double jitter = 1e-10 * trace / double(a.rows);
  for (int i = 0; i < a.rows; ++i) aj.at(i, i) += jitter;
  return cholesky(aj);
}

}  // namespace

Matrix spd_solve(const Matrix& a, const Matrix& b, bool jitter_allowed) {
  if (a.rows != a.cols) throw DimensionError("spd_solve: matrix not square");
  if (b.rows != a.rows) throw DimensionError("spd_solve: rhs row mismatch");
  return chol_solve(spd_factor(a, jitter_allowed), b);
}

Var spd_solve(const Var& a, const Var& b, bool jitter_allowed) {
  auto an = a.node(), bn = b.node();
  if (an->value.rows != an->value.cols) throw DimensionError("spd_solve: matrix not square");
  if (bn->value.rows != an->value.rows) throw DimensionError("spd_solve: rhs row mismatch");
  auto L = std::make_shared<Matrix>(spd_factor(an->value, jitter_allowed));
  Matrix x = chol_solve(*L, bn->value);
  auto n = std::make_shared<Node>();
  n->value = std::move(x);
  n->parents = {an, bn};
  n->requires_grad = an->requires_grad || bn->requires_grad;
  if (n->requires_grad) {
    n->backprop = [an, bn, L](Node& self) {
      Matrix bbar = chol_solve(*L, self.grad);
      if (bn->requires_grad) {
        Matrix& g = bn->ensure_grad();
        for (std::int64_t i = 0; i < g.size(); ++i) g.data[i] += bbar.data[i];
      }
      if (an->requires_grad) {
        Matrix abar = matmul(bbar, transpose(self.value));
        Matrix& g = an->ensure_grad();
        for (std::int64_t i = 0; i < g.size(); ++i) g.data[i] -= abar.data[i];
      }
    };
  }
  return Var(std::move(n));
}

}  // namespace gkcl
