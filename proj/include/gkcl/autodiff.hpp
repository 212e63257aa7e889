#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gkcl/matrix.hpp"
#include "gkcl/rng.hpp"

namespace gkcl {

// One tape node: a value plus the local adjoint rule that scatters this
// node's gradient into its parents. Nodes form a DAG via the parents list;
// a tape is whatever is reachable from the loss node.
struct Node {
  Matrix value;
  Matrix grad;  // allocated on first accumulation, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  int mark = 0;  // DFS state of the current sweep

  Matrix& ensure_grad() {
    if (grad.rows != value.rows || grad.cols != value.cols)
      grad = Matrix(value.rows, value.cols);
    return grad;
  }
};

// Value-semantic handle to a node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Var param(Matrix value);     // leaf that wants gradients
  static Var constant(Matrix value);  // leaf treated as fixed data

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Reverse sweep from a 1x1 loss. Gradients accumulate; a second call without
// clearing adds another full contribution.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);
Var relu(const Var& a);
Var vexp(const Var& a);
Var vlog(const Var& a);
Var sigmoid(const Var& a);
Var pow_const(const Var& a, double p);
Var transpose(const Var& a);
Var reduce_sum(const Var& a);
Var reduce_mean(const Var& a);
Var row_sums(const Var& a);
Var col_sums(const Var& a);
Var add_rowvec(const Var& m, const Var& v);
Var add_colvec(const Var& m, const Var& v);
Var mul_rowvec(const Var& m, const Var& v);
Var mul_colvec(const Var& m, const Var& v);
Var row_softmax(const Var& a);
Var l2_normalize_rows(const Var& a, double eps = 1e-12);
Var slice_cols(const Var& a, int c0, int c1);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
// out row i = table row indices[i]; gradients scatter-add back into table.
Var gather_rows(const Var& table, const std::vector<int>& indices);
// Elementwise Bernoulli cross-entropy of logits against fixed targets in
// [0,1]: max(l,0) - l*t + log1p(exp(-|l|)).
Var bernoulli_xent_logits(const Var& logits, const Matrix& targets);
// Per row i: log sum_j mask(i,j) exp(m(i,j)), max-subtracted. Every row of
// mask needs at least one nonzero entry.
Var row_logsumexp_masked(const Var& m, const Matrix& mask);
// Training mode zeroes each element with probability rate and scales the
// survivors by 1/(1-rate); evaluation mode is the identity.
Var dropout(const Var& a, double rate, RngState& rng, bool training);

}  // namespace gkcl
