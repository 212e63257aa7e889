#pragma once

#include <map>
#include <string>

#include "gkcl/matrix.hpp"

namespace gkcl {

// Named trainable tensor. Names key optimizer state and checkpoint entries,
// so they must be unique within a model.
struct Param {
  std::string name;
  Matrix value;
};

// Adaptive-moment optimizer. State is keyed by parameter name and grows with
// the parameter when new rows are registered (fresh rows start at zero
// moments, as if newly created).
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(Param& p, const Matrix& grad);

 private:
  struct State {
    Matrix m, v;
    long t = 0;
  };
  double lr_, beta1_, beta2_, eps_;
  std::map<std::string, State> state_;
};

class SgdMomentum {
 public:
  explicit SgdMomentum(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(Param& p, const Matrix& grad);

 private:
  double lr_, momentum_;
  std::map<std::string, Matrix> velocity_;
};

}  // namespace gkcl
