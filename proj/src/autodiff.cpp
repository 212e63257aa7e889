#include "gkcl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace gkcl {

namespace {

constexpr std::int64_t kParallelCutoff = 1 << 15;

void acc(Matrix& dst, const Matrix& src) {
#pragma omp parallel for schedule(static) if (dst.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

std::shared_ptr<Node> make_node(Matrix value, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> back) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(back);
  return n;
}

}  // namespace

Var Var::param(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(n);
}

Var Var::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(n);
}

void backward(const Var& loss) {
  Node* root = loss.node().get();
  if (!root) throw ParameterError("backward: undefined loss");
  if (root->value.rows != 1 || root->value.cols != 1)
    throw ParameterError("backward: loss must be 1x1");

  // Iterative DFS; mark 1 = on stack, 2 = finished. Reverse post-order over
  // requires_grad nodes is a valid order for the adjoint sweep.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.push_back({root, 0});
  root->mark = 1;
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (!p->requires_grad) continue;
      if (p->mark == 1) {
        for (Node* v : order) v->mark = 0;
        for (auto& [s, _] : stack) s->mark = 0;
        throw GraphError("backward: cycle detected in tape");
      }
      if (p->mark == 0) {
        p->mark = 1;
        stack.push_back({p, 0});
      }
    } else {
      n->mark = 2;
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior grads are scratch space for this sweep; only leaves accumulate
  // across repeated backward calls.
  for (Node* n : order)
    if (n->backprop && n->grad.rows != 0)
      std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);

  root->ensure_grad().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->mark = 0;
    if (n->backprop && n->grad.rows != 0) n->backprop(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  return Var(make_node(matmul(an->value, bn->value), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) matmul_acc(self.grad, transpose(bn->value), an->ensure_grad());
    if (bn->requires_grad) matmul_acc(transpose(an->value), self.grad, bn->ensure_grad());
  }));
}

Var add(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  return Var(make_node(add(an->value, bn->value), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) acc(an->ensure_grad(), self.grad);
    if (bn->requires_grad) acc(bn->ensure_grad(), self.grad);
  }));
}

Var sub(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  return Var(make_node(sub(an->value, bn->value), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) acc(an->ensure_grad(), self.grad);
    if (bn->requires_grad) {
      Matrix& g = bn->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g.data[i] -= self.grad.data[i];
    }
  }));
}

Var hadamard(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  return Var(make_node(hadamard(an->value, bn->value), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) acc(an->ensure_grad(), hadamard(self.grad, bn->value));
    if (bn->requires_grad) acc(bn->ensure_grad(), hadamard(self.grad, an->value));
  }));
}

Var scale(const Var& a, double s) {
  auto an = a.node();
  return Var(make_node(scale(an->value, s), {an}, [an, s](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g.data[i] += s * self.grad.data[i];
  }));
}

Var add_scalar(const Var& a, double c) {
  auto an = a.node();
  Matrix v = an->value;
  for (auto& x : v.data) x += c;
  require_finite(v, "add_scalar");
  return Var(make_node(std::move(v), {an}, [an](Node& self) {
    acc(an->ensure_grad(), self.grad);
  }));
}

Var relu(const Var& a) {
  auto an = a.node();
  return Var(make_node(relu(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
#pragma omp parallel for schedule(static) if (g.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (an->value.data[i] > 0.0) g.data[i] += self.grad.data[i];
  }));
}

Var vexp(const Var& a) {
  auto an = a.node();
  return Var(make_node(exp_elem(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
#pragma omp parallel for schedule(static) if (g.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < g.size(); ++i)
      g.data[i] += self.grad.data[i] * self.value.data[i];
  }));
}

Var vlog(const Var& a) {
  auto an = a.node();
  return Var(make_node(log_elem(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i)
      g.data[i] += self.grad.data[i] / an->value.data[i];
  }));
}

Var sigmoid(const Var& a) {
  auto an = a.node();
  return Var(make_node(sigmoid_elem(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
#pragma omp parallel for schedule(static) if (g.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const double y = self.value.data[i];
      g.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  }));
}

Var pow_const(const Var& a, double p) {
  auto an = a.node();
  return Var(make_node(pow_elem(an->value, p), {an}, [an, p](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i)
      g.data[i] += self.grad.data[i] * p * std::pow(an->value.data[i], p - 1.0);
  }));
}

Var transpose(const Var& a) {
  auto an = a.node();
  return Var(make_node(transpose(an->value), {an}, [an](Node& self) {
    acc(an->ensure_grad(), transpose(self.grad));
  }));
}

Var reduce_sum(const Var& a) {
  auto an = a.node();
  return Var(make_node(reduce_sum(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    const double s = self.grad.data[0];
    for (auto& v : g.data) v += s;
  }));
}

Var reduce_mean(const Var& a) {
  auto an = a.node();
  return Var(make_node(reduce_mean(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    const double s = self.grad.data[0] / double(g.size());
    for (auto& v : g.data) v += s;
  }));
}

Var row_sums(const Var& a) {
  auto an = a.node();
  return Var(make_node(row_sums(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (int r = 0; r < g.rows; ++r) {
      const double s = self.grad.data[r];
      double* p = g.row_ptr(r);
      for (int c = 0; c < g.cols; ++c) p[c] += s;
    }
  }));
}

Var col_sums(const Var& a) {
  auto an = a.node();
  return Var(make_node(col_sums(an->value), {an}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (int r = 0; r < g.rows; ++r) {
      double* p = g.row_ptr(r);
      for (int c = 0; c < g.cols; ++c) p[c] += self.grad.data[c];
    }
  }));
}

Var add_rowvec(const Var& m, const Var& v) {
  auto mn = m.node(), vn = v.node();
  return Var(make_node(add_rowvec(mn->value, vn->value), {mn, vn}, [mn, vn](Node& self) {
    if (mn->requires_grad) acc(mn->ensure_grad(), self.grad);
    if (vn->requires_grad) acc(vn->ensure_grad(), col_sums(self.grad));
  }));
}

Var add_colvec(const Var& m, const Var& v) {
  auto mn = m.node(), vn = v.node();
  return Var(make_node(add_colvec(mn->value, vn->value), {mn, vn}, [mn, vn](Node& self) {
    if (mn->requires_grad) acc(mn->ensure_grad(), self.grad);
    if (vn->requires_grad) acc(vn->ensure_grad(), row_sums(self.grad));
  }));
}

Var mul_rowvec(const Var& m, const Var& v) {
  auto mn = m.node(), vn = v.node();
  return Var(make_node(mul_rowvec(mn->value, vn->value), {mn, vn}, [mn, vn](Node& self) {
    if (mn->requires_grad) acc(mn->ensure_grad(), mul_rowvec(self.grad, vn->value));
    if (vn->requires_grad) acc(vn->ensure_grad(), col_sums(hadamard(self.grad, mn->value)));
  }));
}

Var mul_colvec(const Var& m, const Var& v) {
  auto mn = m.node(), vn = v.node();
  return Var(make_node(mul_colvec(mn->value, vn->value), {mn, vn}, [mn, vn](Node& self) {
    if (mn->requires_grad) acc(mn->ensure_grad(), mul_colvec(self.grad, vn->value));
    if (vn->requires_grad) acc(vn->ensure_grad(), row_sums(hadamard(self.grad, mn->value)));
  }));
}

Var row_softmax(const Var& a) {
  auto an = a.node();
  return Var(make_node(row_softmax(an->value), {an}, [an](Node& self) {
    const Matrix& y = self.value;
    Matrix& g = an->ensure_grad();
    for (int r = 0; r < y.rows; ++r) {
      const double* yr = y.row_ptr(r);
      const double* gr = self.grad.row_ptr(r);
      double dot = 0.0;
      for (int c = 0; c < y.cols; ++c) dot += yr[c] * gr[c];
      double* o = g.row_ptr(r);
      for (int c = 0; c < y.cols; ++c) o[c] += yr[c] * (gr[c] - dot);
    }
  }));
}

Var l2_normalize_rows(const Var& a, double eps) {
  auto an = a.node();
  return Var(make_node(l2_normalize_rows(an->value, eps), {an}, [an, eps](Node& self) {
    const Matrix& x = an->value;
    const Matrix& y = self.value;
    Matrix& g = an->ensure_grad();
    for (int r = 0; r < x.rows; ++r) {
      const double* xr = x.row_ptr(r);
      const double* yr = y.row_ptr(r);
      const double* gr = self.grad.row_ptr(r);
      double sq = 0.0;
      for (int c = 0; c < x.cols; ++c) sq += xr[c] * xr[c];
      const double n = std::sqrt(sq);
      double* o = g.row_ptr(r);
      if (n >= eps) {
        double dot = 0.0;
        for (int c = 0; c < x.cols; ++c) dot += yr[c] * gr[c];
        for (int c = 0; c < x.cols; ++c) o[c] += (gr[c] - yr[c] * dot) / n;
      } else {
        for (int c = 0; c < x.cols; ++c) o[c] += gr[c] / eps;
      }
    }
  }));
}

Var slice_cols(const Var& a, int c0, int c1) {
  auto an = a.node();
  if (c0 < 0 || c1 > an->value.cols || c0 >= c1)
    throw DimensionError("slice_cols: bad column range");
  Matrix v(an->value.rows, c1 - c0);
  for (int r = 0; r < v.rows; ++r)
    std::copy(an->value.row_ptr(r) + c0, an->value.row_ptr(r) + c1, v.row_ptr(r));
  return Var(make_node(std::move(v), {an}, [an, c0](Node& self) {
    Matrix& g = an->ensure_grad();
    for (int r = 0; r < self.grad.rows; ++r) {
      const double* src = self.grad.row_ptr(r);
      double* dst = g.row_ptr(r) + c0;
      for (int c = 0; c < self.grad.cols; ++c) dst[c] += src[c];
    }
  }));
}

Var concat_cols(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  if (an->value.rows != bn->value.rows) throw DimensionError("concat_cols: row mismatch");
  const int ca = an->value.cols, cb = bn->value.cols;
  Matrix v(an->value.rows, ca + cb);
  for (int r = 0; r < v.rows; ++r) {
    std::copy(an->value.row_ptr(r), an->value.row_ptr(r) + ca, v.row_ptr(r));
    std::copy(bn->value.row_ptr(r), bn->value.row_ptr(r) + cb, v.row_ptr(r) + ca);
  }
  return Var(make_node(std::move(v), {an, bn}, [an, bn, ca, cb](Node& self) {
    for (int r = 0; r < self.grad.rows; ++r) {
      const double* src = self.grad.row_ptr(r);
      if (an->requires_grad) {
        double* dst = an->ensure_grad().row_ptr(r);
        for (int c = 0; c < ca; ++c) dst[c] += src[c];
      }
      if (bn->requires_grad) {
        double* dst = bn->ensure_grad().row_ptr(r);
        for (int c = 0; c < cb; ++c) dst[c] += src[ca + c];
      }
    }
  }));
}

Var concat_rows(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  if (an->value.cols != bn->value.cols) throw DimensionError("concat_rows: column mismatch");
  const int ra = an->value.rows, rb = bn->value.rows, C = an->value.cols;
  Matrix v(ra + rb, C);
  std::copy(an->value.data.begin(), an->value.data.end(), v.data.begin());
  std::copy(bn->value.data.begin(), bn->value.data.end(), v.data.begin() + std::size_t(ra) * C);
  return Var(make_node(std::move(v), {an, bn}, [an, bn, ra, rb, C](Node& self) {
    if (an->requires_grad) {
      Matrix& g = an->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (bn->requires_grad) {
      Matrix& g = bn->ensure_grad();
      const std::size_t off = std::size_t(ra) * C;
      for (std::int64_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[off + i];
    }
  }));
}

Var gather_rows(const Var& table, const std::vector<int>& indices) {
  auto tn = table.node();
  for (int i : indices)
    if (i < 0 || i >= tn->value.rows) throw ParameterError("gather_rows: index out of range");
  Matrix v(int(indices.size()), tn->value.cols);
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy(tn->value.row_ptr(indices[r]), tn->value.row_ptr(indices[r]) + tn->value.cols,
              v.row_ptr(int(r)));
  auto idx = indices;
  return Var(make_node(std::move(v), {tn}, [tn, idx](Node& self) {
    Matrix& g = tn->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double* src = self.grad.row_ptr(int(r));
      double* dst = g.row_ptr(idx[r]);
      for (int c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  }));
}

Var bernoulli_xent_logits(const Var& logits, const Matrix& targets) {
  auto ln = logits.node();
  if (!ln->value.same_shape(targets))
    throw DimensionError("bernoulli_xent_logits: target shape mismatch");
  Matrix v(ln->value.rows, ln->value.cols);
#pragma omp parallel for schedule(static) if (v.size() > kParallelCutoff)
  for (std::int64_t i = 0; i < v.size(); ++i) {
    const double l = ln->value.data[i], t = targets.data[i];
    v.data[i] = std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  Matrix tcopy = targets;
  return Var(make_node(std::move(v), {ln}, [ln, tcopy](Node& self) {
    Matrix& g = ln->ensure_grad();
#pragma omp parallel for schedule(static) if (g.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const double l = ln->value.data[i];
      const double s = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
      g.data[i] += self.grad.data[i] * (s - tcopy.data[i]);
    }
  }));
}

Var row_logsumexp_masked(const Var& m, const Matrix& mask) {
  auto mn = m.node();
  if (!mn->value.same_shape(mask))
    throw DimensionError("row_logsumexp_masked: mask shape mismatch");
  const int R = mask.rows, C = mask.cols;
  Matrix v(R, 1);
  for (int r = 0; r < R; ++r) {
    const double* x = mn->value.row_ptr(r);
    const double* w = mask.row_ptr(r);
    double mx = -HUGE_VAL;
    for (int c = 0; c < C; ++c)
      if (w[c] != 0.0) mx = std::max(mx, x[c]);
    if (mx == -HUGE_VAL) throw ParameterError("row_logsumexp_masked: empty mask row");
    double s = 0.0;
    for (int c = 0; c < C; ++c)
      if (w[c] != 0.0) s += std::exp(x[c] - mx);
    v.data[r] = mx + std::log(s);
  }
  Matrix mcopy = mask;
  return Var(make_node(std::move(v), {mn}, [mn, mcopy](Node& self) {
    Matrix& g = mn->ensure_grad();
    for (int r = 0; r < g.rows; ++r) {
      const double gr = self.grad.data[r];
      const double lse = self.value.data[r];
      const double* x = mn->value.row_ptr(r);
      const double* w = mcopy.row_ptr(r);
      double* o = g.row_ptr(r);
      for (int c = 0; c < g.cols; ++c)
        if (w[c] != 0.0) o[c] += gr * std::exp(x[c] - lse);
    }
  }));
}

Var dropout(const Var& a, double rate, RngState& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return a;
  auto an = a.node();
  Matrix mask(an->value.rows, an->value.cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& v : mask.data) v = rng.next_double() < rate ? 0.0 : keep_scale;
  Matrix out = hadamard(an->value, mask);
  return Var(make_node(std::move(out), {an}, [an, mask](Node& self) {
    acc(an->ensure_grad(), hadamard(self.grad, mask));
  }));
}

}  // namespace gkcl
