#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately naive (triple loops, Gaussian elimination, long double
// accumulation) and shares no code with the library paths it checks.

#include <cmath>
#include <functional>
#include <vector>

#include "gkcl/matrix.hpp"

namespace oracle {

inline gkcl::Matrix naive_matmul(const gkcl::Matrix& a, const gkcl::Matrix& b) {
  gkcl::Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

// Gaussian elimination with partial pivoting; solves a x = b.
inline gkcl::Matrix gauss_solve(gkcl::Matrix a, gkcl::Matrix b) {
  const int n = a.rows, m = b.cols;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a.at(col, c), a.at(piv, c));
      for (int c = 0; c < m; ++c) std::swap(b.at(col, c), b.at(piv, c));
    }
    const double d = a.at(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = a.at(r, col) / d;
      for (int c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
      for (int c = 0; c < m; ++c) b.at(r, c) -= f * b.at(col, c);
    }
  }
  gkcl::Matrix x(n, m);
  for (int r = n - 1; r >= 0; --r)
    for (int c = 0; c < m; ++c) {
      double s = b.at(r, c);
      for (int k = r + 1; k < n; ++k) s -= a.at(r, k) * x.at(k, c);
      x.at(r, c) = s / a.at(r, r);
    }
  return x;
}

inline gkcl::Matrix gauss_inverse(const gkcl::Matrix& a) {
  return gauss_solve(a, gkcl::Matrix::identity(a.rows));
}

// Softmax per row in long double.
inline gkcl::Matrix softmax_rows_ld(const gkcl::Matrix& m) {
  gkcl::Matrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    long double s = 0.0L;
    std::vector<long double> e(m.cols);
    for (int c = 0; c < m.cols; ++c) {
      e[c] = std::exp((long double)m.at(r, c));
      s += e[c];
    }
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = double(e[c] / s);
  }
  return out;
}

// Eq. 4/5 as a literal double loop in long double.
inline double supcon_reference(const gkcl::Matrix& s, const std::vector<int>& labels,
                               double tau) {
  const int n = s.rows;
  long double total = 0.0L;
  for (int i = 0; i < n; ++i) {
    std::vector<int> positives;
    for (int j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) positives.push_back(j);
    if (positives.empty()) continue;
    long double denom = 0.0L;
    for (int a = 0; a < n; ++a) {
      if (a == i) continue;
      long double dot = 0.0L;
      for (int c = 0; c < s.cols; ++c) dot += (long double)s.at(i, c) * s.at(a, c);
      denom += std::exp(dot / (long double)tau);
    }
    long double li = 0.0L;
    for (int p : positives) {
      long double dot = 0.0L;
      for (int c = 0; c < s.cols; ++c) dot += (long double)s.at(i, c) * s.at(p, c);
      li += std::log(std::exp(dot / (long double)tau) / denom);
    }
    total += -li / (long double)positives.size();
  }
  return double(total);
}

inline double bernoulli_xent_reference(double logit, double target) {
  const long double p = 1.0L / (1.0L + std::exp(-(long double)logit));
  return double(-(long double)target * std::log(p) -
                (1.0L - (long double)target) * std::log(1.0L - p));
}

inline double kl_gaussian_reference(double mu, double logsigma, double prior_mu,
                                    double prior_logsigma) {
  const double s = std::exp(logsigma), ps = std::exp(prior_logsigma);
  return std::log(ps / s) + (s * s + (mu - prior_mu) * (mu - prior_mu)) / (2.0 * ps * ps) - 0.5;
}

// Central finite differences of f with respect to every entry of every
// listed matrix. f must be a pure function of the current matrix contents.
inline std::vector<gkcl::Matrix> finite_difference(const std::function<double()>& f,
                                                   const std::vector<gkcl::Matrix*>& params,
                                                   double h = 1e-5) {
  std::vector<gkcl::Matrix> grads;
  for (gkcl::Matrix* p : params) {
    gkcl::Matrix g(p->rows, p->cols);
    for (std::int64_t i = 0; i < p->size(); ++i) {
      const double orig = p->data[i];
      p->data[i] = orig + h;
      const double up = f();
      p->data[i] = orig - h;
      const double down = f();
      p->data[i] = orig;
      g.data[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// max over entries of |a-f| / max(|a|, |f|, floor)
inline double max_rel_err(const std::vector<gkcl::Matrix>& ad,
                          const std::vector<gkcl::Matrix>& fd, double floor = 1e-2) {
  double worst = 0.0;
  for (std::size_t p = 0; p < ad.size(); ++p)
    for (std::int64_t i = 0; i < ad[p].size(); ++i) {
      const double a = ad[p].data[i], f = fd[p].data[i];
      const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
      worst = std::max(worst, rel);
    }
  return worst;
}

}  // namespace oracle
