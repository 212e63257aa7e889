#include "gkcl/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "gkcl/linalg.hpp"

namespace gkcl {

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "poly" || s == "polynomial") return KernelKind::polynomial;
  if (s == "rbf") return KernelKind::rbf;
  throw ParameterError("unknown kernel kind: " + s);
}

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "poly";
    case KernelKind::rbf: return "rbf";
  }
  return "?";
}

namespace {

void validate(const KernelSpec& spec) {
  if (spec.kind == KernelKind::polynomial) {
    if (spec.degree < 1) throw ParameterError("polynomial kernel: degree must be >= 1");
    if (spec.offset < 0.0) throw ParameterError("polynomial kernel: offset must be >= 0");
  }
  if (spec.kind == KernelKind::rbf && !(spec.bandwidth > 0.0))
    throw ParameterError("rbf kernel: bandwidth must be > 0");
}

// Squared distances between feature columns, accumulated directly per pair
// so coincident points give exactly zero (no cancellation).
Var pairwise_sqdist(const Var& a, const Var& b) {
  auto an = a.node(), bn = b.node();
  const int d = an->value.rows, na = an->value.cols, nb = bn->value.cols;
  Matrix out(na, nb);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < na; ++i) {
    double* orow = out.row_ptr(i);
    for (int j = 0; j < nb; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = an->value.at(k, i) - bn->value.at(k, j);
        s += diff * diff;
      }
      orow[j] = s;
    }
  }
  require_finite(out, "pairwise_sqdist");
  auto n = std::make_shared<Node>();
  n->value = std::move(out);
  n->parents = {an, bn};
  n->requires_grad = an->requires_grad || bn->requires_grad;
  if (n->requires_grad) {
    n->backprop = [an, bn, d, na, nb](Node& self) {
      Matrix* ga = an->requires_grad ? &an->ensure_grad() : nullptr;
      Matrix* gb = bn->requires_grad ? &bn->ensure_grad() : nullptr;
      for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
          const double g2 = 2.0 * self.grad.at(i, j);
          if (g2 == 0.0) continue;
          for (int k = 0; k < d; ++k) {
            const double diff = an->value.at(k, i) - bn->value.at(k, j);
            if (ga) ga->at(k, i) += g2 * diff;
            if (gb) gb->at(k, j) -= g2 * diff;
          }
        }
    };
  }
  return Var(std::move(n));
}

}  // namespace

Var gram(const Var& phi_a, const Var& phi_b, const KernelSpec& spec) {
  validate(spec);
  if (phi_a.value().rows != phi_b.value().rows)
    throw DimensionError("gram: feature dimension mismatch");
  switch (spec.kind) {
    case KernelKind::linear:
      return matmul(transpose(phi_a), phi_b);
    case KernelKind::polynomial:
      return pow_const(add_scalar(matmul(transpose(phi_a), phi_b), spec.offset),
                       double(spec.degree));
    case KernelKind::rbf:
      return vexp(scale(pairwise_sqdist(phi_a, phi_b),
                        -0.5 / (spec.bandwidth * spec.bandwidth)));
  }
  throw ParameterError("gram: bad kernel kind");
}

Matrix gram(const Matrix& phi_a, const Matrix& phi_b, const KernelSpec& spec) {
  return gram(Var::constant(phi_a), Var::constant(phi_b), spec).value();
}

double median_pairwise_distance(const Matrix& phi) {
  const int n = phi.cols;
  if (n < 2) throw ParameterError("median_pairwise_distance: need at least two columns");
  std::vector<double> dists;
  dists.reserve(std::size_t(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (int d = 0; d < phi.rows; ++d) {
        const double diff = phi.at(d, i) - phi.at(d, j);
        sq += diff * diff;
      }
      dists.push_back(std::sqrt(sq));
    }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  return dists[dists.size() / 2];
}

Var krr_logits(const Var& coreset_features, const Matrix& coreset_labels,
               const Var& query_features, const RidgeConfig& ridge,
               const KernelSpec& spec) {
  const int n_c = coreset_features.value().cols;
  if (n_c < 1) throw ParameterError("krr: empty coreset");
  if (coreset_labels.cols != n_c) throw DimensionError("krr: label column count mismatch");
  for (int j = 0; j < coreset_labels.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < coreset_labels.rows; ++i) {
      const double v = coreset_labels.at(i, j);
      if (v != 0.0 && v != 1.0) throw ParameterError("krr: labels must be one-hot");
      s += v;
    }
    if (s != 1.0) throw ParameterError("krr: labels must be one-hot");
  }
  if (!(ridge.lambda > 0.0)) throw ParameterError("krr: lambda must be > 0");

  Var k = gram(coreset_features, coreset_features, spec);
  Var ktilde = gram(coreset_features, query_features, spec);
  Var a = add(k, Var::constant(scale(Matrix::identity(n_c), ridge.lambda)));
  Var solved;
  try {
    solved = spd_solve(a, ktilde, ridge.jitter_allowed);
  } catch (const FactorizationError& e) {
    throw KernelDegeneracyError(std::string("krr: gram matrix not SPD: ") + e.what());
  }
  return matmul(Var::constant(coreset_labels), solved);
}

Var krr_predict(const Var& coreset_features, const Matrix& coreset_labels,
                const Var& query_features, const RidgeConfig& ridge,
                const KernelSpec& spec) {
  Var logits = krr_logits(coreset_features, coreset_labels, query_features, ridge, spec);
  return transpose(row_softmax(transpose(logits)));
}

Matrix krr_predict(const Matrix& coreset_features, const Matrix& coreset_labels,
                   const Matrix& query_features, const RidgeConfig& ridge,
                   const KernelSpec& spec) {
  return krr_predict(Var::constant(coreset_features), coreset_labels,
                     Var::constant(query_features), ridge, spec)
      .value();
}

Matrix one_hot_columns(const std::vector<int>& labels, int num_classes) {
  Matrix y(num_classes, int(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= num_classes)
      throw ParameterError("one_hot_columns: label out of range");
    y.at(labels[j], int(j)) = 1.0;
  }
  return y;
}

}  // namespace gkcl
