#pragma once

#include <string>

#include "gkcl/autodiff.hpp"
#include "gkcl/matrix.hpp"

namespace gkcl {

enum class KernelKind { linear, polynomial, rbf };

KernelKind kernel_kind_from_string(const std::string& s);
std::string to_string(KernelKind k);

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  int degree = 2;          // polynomial only
  double offset = 1.0;     // polynomial only
  double bandwidth = 1.0;  // rbf only
};

struct RidgeConfig {
  double lambda = 0.1;
  bool jitter_allowed = true;
};

// Pairwise kernel evaluations between feature columns: entry (i,j) is
// k(a_i, b_j). Features are d x N with samples as columns.
Var gram(const Var& phi_a, const Var& phi_b, const KernelSpec& spec);
Matrix gram(const Matrix& phi_a, const Matrix& phi_b, const KernelSpec& spec);

// Median of pairwise Euclidean distances between distinct feature columns;
// the usual default bandwidth for the rbf kernel.
double median_pairwise_distance(const Matrix& phi);

// Pre-softmax class scores Y (lambda I + K)^-1 Ktilde, shape C x N_q.
Var krr_logits(const Var& coreset_features, const Matrix& coreset_labels,
               const Var& query_features, const RidgeConfig& ridge,
               const KernelSpec& spec);

// Class probabilities per query column (softmax over classes of the logits).
Var krr_predict(const Var& coreset_features, const Matrix& coreset_labels,
                const Var& query_features, const RidgeConfig& ridge,
                const KernelSpec& spec);
Matrix krr_predict(const Matrix& coreset_features, const Matrix& coreset_labels,
                   const Matrix& query_features, const RidgeConfig& ridge,
                   const KernelSpec& spec);

Matrix one_hot_columns(const std::vector<int>& labels, int num_classes);

}  // namespace gkcl
