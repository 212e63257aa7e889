#include "gkcl/optim.hpp"

#include <cmath>

namespace gkcl {

namespace {

// Append zero rows so state tensors track parameters that grow (class
// registration extends prior tables downward, never sideways).
void grow_rows(Matrix& m, int rows, int cols) {
  if (m.rows == rows && m.cols == cols) return;
  if (m.rows == 0) {
    m = Matrix(rows, cols);
    return;
  }
  if (m.cols != cols || m.rows > rows)
    throw DimensionError("optimizer state: incompatible parameter reshape");
  Matrix grown(rows, cols);
  std::copy(m.data.begin(), m.data.end(), grown.data.begin());
  m = std::move(grown);
}

}  // namespace

void AdamOptimizer::step(Param& p, const Matrix& grad) {
  if (!p.value.same_shape(grad)) throw DimensionError("adam: gradient shape mismatch");
  State& s = state_[p.name];
  grow_rows(s.m, p.value.rows, p.value.cols);
  grow_rows(s.v, p.value.rows, p.value.cols);
  s.t += 1;
  const double bc1 = 1.0 - std::pow(beta1_, double(s.t));
  const double bc2 = 1.0 - std::pow(beta2_, double(s.t));
  for (std::int64_t i = 0; i < p.value.size(); ++i) {
    const double g = grad.data[i];
    s.m.data[i] = beta1_ * s.m.data[i] + (1.0 - beta1_) * g;
    s.v.data[i] = beta2_ * s.v.data[i] + (1.0 - beta2_) * g * g;
    const double mhat = s.m.data[i] / bc1;
    const double vhat = s.v.data[i] / bc2;
    p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
  require_finite(p.value, "adam step");
}

void SgdMomentum::step(Param& p, const Matrix& grad) {
  if (!p.value.same_shape(grad)) throw DimensionError("sgd: gradient shape mismatch");
  Matrix& vel = velocity_[p.name];
  grow_rows(vel, p.value.rows, p.value.cols);
  for (std::int64_t i = 0; i < p.value.size(); ++i) {
    vel.data[i] = momentum_ * vel.data[i] + grad.data[i];
    p.value.data[i] -= lr_ * vel.data[i];
  }
  require_finite(p.value, "sgd step");
}

}  // namespace gkcl
