#include <doctest.h>

#include <cmath>

#include "gkcl/kernels.hpp"
#include "gkcl/linalg.hpp"
#include "gkcl/rng.hpp"
#include "oracles.hpp"

using namespace gkcl;

namespace {

double kernel_scalar(const Matrix& phi_a, int i, const Matrix& phi_b, int j,
                     const KernelSpec& spec) {
  double dot = 0.0, sq = 0.0;
  for (int d = 0; d < phi_a.rows; ++d) {
    dot += phi_a.at(d, i) * phi_b.at(d, j);
    const double diff = phi_a.at(d, i) - phi_b.at(d, j);
    sq += diff * diff;
  }
  switch (spec.kind) {
    case KernelKind::linear: return dot;
    case KernelKind::polynomial: return std::pow(dot + spec.offset, spec.degree);
    case KernelKind::rbf: return std::exp(-sq / (2.0 * spec.bandwidth * spec.bandwidth));
  }
  return 0.0;
}

Matrix random_features(int d, int n, RngState& rng, double scale = 1.0) {
  Matrix m = sample_gaussian(d, n, rng);
  for (auto& v : m.data) v *= scale;
  return m;
}

}  // namespace

TEST_CASE("linear gram hand case") {
  Matrix a(2, 1, {1, 2});
  Matrix b(2, 1, {3, 4});
  CHECK(gram(a, b, KernelSpec{}).at(0, 0) == 11.0);
}

TEST_CASE("rbf kernel of a point with itself is exactly one") {
  RngState rng(3);
  Matrix phi = random_features(5, 6, rng, 2.0);
  for (double bw : {0.1, 1.0, 7.5}) {
    KernelSpec spec{KernelKind::rbf};
    spec.bandwidth = bw;
    Matrix k = gram(phi, phi, spec);
    for (int i = 0; i < 6; ++i) CHECK(k.at(i, i) == 1.0);
  }
}

TEST_CASE("gram matches the scalar loop oracle for all kernels") {
  RngState rng(5);
  Matrix a = random_features(3, 4, rng);
  Matrix b = random_features(3, 5, rng);
  for (KernelKind kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    KernelSpec spec;
    spec.kind = kind;
    spec.degree = 2;
    spec.offset = 1.0;
    spec.bandwidth = 1.3;
    Matrix k = gram(a, b, spec);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j)
        CHECK(std::abs(k.at(i, j) - kernel_scalar(a, i, b, j, spec)) < 1e-12);
  }
}

TEST_CASE("gram symmetry and eigenvalue floor") {
  RngState rng(7);
  Matrix phi = random_features(4, 7, rng);
  for (KernelKind kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    KernelSpec spec;
    spec.kind = kind;
    spec.bandwidth = 0.9;
    Matrix k = gram(phi, phi, spec);
    CHECK(max_abs_diff(k, transpose(k)) < 1e-12);
    // PSD within the -1e-8 floor: K + 1e-8 I admits a Cholesky factor
    Matrix shifted = k;
    for (int i = 0; i < k.rows; ++i) shifted.at(i, i) += 1e-8;
    CHECK_NOTHROW(cholesky(shifted));
  }
}

TEST_CASE("gram rejects mismatched feature dimensions and bad hyperparameters") {
  CHECK_THROWS_AS(gram(Matrix(3, 2), Matrix(4, 2), KernelSpec{}), DimensionError);
  KernelSpec bad_rbf{KernelKind::rbf};
  bad_rbf.bandwidth = 0.0;
  CHECK_THROWS_AS(gram(Matrix(3, 2), Matrix(3, 2), bad_rbf), ParameterError);
  KernelSpec bad_poly{KernelKind::polynomial};
  bad_poly.degree = 0;
  CHECK_THROWS_AS(gram(Matrix(3, 2), Matrix(3, 2), bad_poly), ParameterError);
}

TEST_CASE("krr orthonormal two-class coreset") {
  // psi(X) = I2, Y = I2, lambda = 1, query = e1: logits (0.5, 0)
  Matrix coreset = Matrix::identity(2);
  Matrix labels = Matrix::identity(2);
  Matrix query(2, 1, {1, 0});
  RidgeConfig ridge;
  ridge.lambda = 1.0;
  Var logits = krr_logits(Var::constant(coreset), labels, Var::constant(query), ridge,
                          KernelSpec{});
  CHECK(logits.value().at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(logits.value().at(1, 0) == doctest::Approx(0.0).epsilon(1e-15));
  Matrix probs = krr_predict(coreset, labels, query, ridge, KernelSpec{});
  CHECK(probs.at(0, 0) > probs.at(1, 0));
}

TEST_CASE("krr matches the dense-inverse oracle") {
  RngState rng(11);
  for (KernelKind kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    KernelSpec spec;
    spec.kind = kind;
    spec.bandwidth = 1.7;
    const int d = 4, nc = 6, c = 3, nq = 5;
    Matrix cf = random_features(d, nc, rng);
    Matrix qf = random_features(d, nq, rng);
    std::vector<int> lab = {0, 1, 2, 0, 1, 2};
    Matrix y = one_hot_columns(lab, c);
    RidgeConfig ridge;
    ridge.lambda = 0.1;
    Matrix probs = krr_predict(cf, y, qf, ridge, spec);

    Matrix k(nc, nc), ktil(nc, nq);
    for (int i = 0; i < nc; ++i) {
      for (int j = 0; j < nc; ++j) k.at(i, j) = kernel_scalar(cf, i, cf, j, spec);
      for (int j = 0; j < nq; ++j) ktil.at(i, j) = kernel_scalar(cf, i, qf, j, spec);
    }
    Matrix a = k;
    for (int i = 0; i < nc; ++i) a.at(i, i) += ridge.lambda;
    Matrix logits = oracle::naive_matmul(y, oracle::naive_matmul(oracle::gauss_inverse(a), ktil));
    Matrix expected = transpose(oracle::softmax_rows_ld(transpose(logits)));
    CHECK(max_abs_diff(probs, expected) < 1e-8);
  }
}

TEST_CASE("krr ridge-dominated limit approaches uniform probabilities") {
  RngState rng(13);
  Matrix cf = random_features(3, 8, rng);
  Matrix qf = random_features(3, 4, rng);
  std::vector<int> lab = {0, 1, 2, 3, 0, 1, 2, 3};
  Matrix y = one_hot_columns(lab, 4);
  RidgeConfig ridge;
  ridge.lambda = 1e9;
  Matrix probs = krr_predict(cf, y, qf, ridge, KernelSpec{});
  for (int q = 0; q < 4; ++q)
    for (int c = 0; c < 4; ++c) CHECK(std::abs(probs.at(c, q) - 0.25) < 1e-6);
}

TEST_CASE("krr probability columns sum to one with entries in [0,1]") {
  RngState rng(17);
  Matrix cf = random_features(5, 9, rng);
  Matrix qf = random_features(5, 6, rng);
  std::vector<int> lab = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  Matrix y = one_hot_columns(lab, 3);
  Matrix probs = krr_predict(cf, y, qf, RidgeConfig{}, KernelSpec{});
  for (int q = 0; q < 6; ++q) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      CHECK(probs.at(c, q) >= 0.0);
      CHECK(probs.at(c, q) <= 1.0);
      s += probs.at(c, q);
    }
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
}

TEST_CASE("krr argmax invariant under joint coreset permutation") {
  RngState rng(19);
  const int nc = 7;
  Matrix cf = random_features(4, nc, rng);
  Matrix qf = random_features(4, 5, rng);
  std::vector<int> lab = {0, 1, 2, 0, 1, 2, 0};
  Matrix probs = krr_predict(cf, one_hot_columns(lab, 3), qf, RidgeConfig{}, KernelSpec{});

  RngState prng(23);
  std::vector<int> perm = sample_permutation(nc, prng);
  Matrix cf2(4, nc);
  std::vector<int> lab2(nc);
  for (int j = 0; j < nc; ++j) {
    for (int d = 0; d < 4; ++d) cf2.at(d, j) = cf.at(d, perm[j]);
    lab2[j] = lab[perm[j]];
  }
  Matrix probs2 = krr_predict(cf2, one_hot_columns(lab2, 3), qf, RidgeConfig{}, KernelSpec{});
  for (int q = 0; q < 5; ++q) {
    int a1 = 0, a2 = 0;
    for (int c = 1; c < 3; ++c) {
      if (probs.at(c, q) > probs.at(a1, q)) a1 = c;
      if (probs2.at(c, q) > probs2.at(a2, q)) a2 = c;
    }
    CHECK(a1 == a2);
  }
}

TEST_CASE("linear krr agrees with the primal ridge route when d <= N_c") {
  RngState rng(29);
  const int d = 3, nc = 10, c = 2, nq = 6;
  Matrix cf = random_features(d, nc, rng);
  Matrix qf = random_features(d, nq, rng);
  std::vector<int> lab = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  Matrix y = one_hot_columns(lab, c);
  RidgeConfig ridge;
  ridge.lambda = 0.37;
  Matrix dual = krr_predict(cf, y, qf, ridge, KernelSpec{});

  // primal: Y Phi^T (lambda I_d + Phi Phi^T)^-1 q
  Matrix a = oracle::naive_matmul(cf, transpose(cf));
  for (int i = 0; i < d; ++i) a.at(i, i) += ridge.lambda;
  Matrix logits =
      oracle::naive_matmul(oracle::naive_matmul(y, transpose(cf)),
                           oracle::naive_matmul(oracle::gauss_inverse(a), qf));
  Matrix primal = transpose(oracle::softmax_rows_ld(transpose(logits)));
  CHECK(max_abs_diff(dual, primal) < 1e-6);
}

TEST_CASE("krr validates one-hot labels and lambda") {
  Matrix cf = Matrix::identity(3);
  Matrix qf(3, 1, {1, 0, 0});
  Matrix not_onehot = Matrix::filled(2, 3, 0.5);
  CHECK_THROWS_AS(krr_predict(cf, not_onehot, qf, RidgeConfig{}, KernelSpec{}), ParameterError);
  RidgeConfig bad;
  bad.lambda = 0.0;
  Matrix y = one_hot_columns({0, 1, 0}, 2);
  CHECK_THROWS_AS(krr_predict(cf, y, qf, bad, KernelSpec{}), ParameterError);
}

TEST_CASE("krr degeneracy error without jitter; jitter rescues duplicates") {
  // identical unit coreset columns, vanishing ridge: second Cholesky pivot
  // is exactly zero
  Matrix cf(3, 4);
  for (int j = 0; j < 4; ++j) cf.at(0, j) = 1.0;
  Matrix y = one_hot_columns({0, 1, 0, 1}, 2);
  Matrix qf(3, 1, {1, 0, 0});
  RidgeConfig ridge;
  ridge.lambda = 1e-300;
  ridge.jitter_allowed = false;
  CHECK_THROWS_AS(krr_predict(cf, y, qf, ridge, KernelSpec{}), KernelDegeneracyError);
  ridge.jitter_allowed = true;
  CHECK_NOTHROW(krr_predict(cf, y, qf, ridge, KernelSpec{}));
}

TEST_CASE("krr gradients flow into both feature inputs") {
  RngState rng(31);
  Matrix cfv = random_features(3, 5, rng, 0.8);
  Matrix qfv = random_features(3, 4, rng, 0.8);
  Matrix y = one_hot_columns({0, 1, 0, 1, 0}, 2);
  RidgeConfig ridge;

  for (KernelKind kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    KernelSpec spec;
    spec.kind = kind;
    spec.bandwidth = 1.1;
    auto build = [&](bool with_tape) -> std::pair<double, std::vector<Matrix>> {
      Var cf = Var::param(cfv), qf = Var::param(qfv);
      Var probs = krr_predict(cf, y, qf, ridge, spec);
      Var loss = reduce_sum(hadamard(probs, probs));
      std::vector<Matrix> grads;
      if (with_tape) {
        backward(loss);
        grads = {cf.grad(), qf.grad()};
      }
      return {loss.value().data[0], grads};
    };
    auto ad = build(true).second;
    auto fd = oracle::finite_difference([&] { return build(false).first; }, {&cfv, &qfv});
    CHECK(oracle::max_rel_err(ad, fd) < 1e-4);
  }
}

TEST_CASE("median pairwise distance") {
  Matrix phi(1, 3, {0.0, 1.0, 3.0});
  // pairwise distances 1, 3, 2 -> median 2
  CHECK(median_pairwise_distance(phi) == doctest::Approx(2.0));
  CHECK_THROWS_AS(median_pairwise_distance(Matrix(2, 1)), ParameterError);
}
