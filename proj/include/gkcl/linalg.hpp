#pragma once

#include "gkcl/autodiff.hpp"
#include "gkcl/matrix.hpp"

namespace gkcl {

// Lower-triangular L with a = L*L^T. Throws FactorizationError with the
// failing diagonal index when a pivot is not strictly positive.
Matrix cholesky(const Matrix& a);

// Solves (L*L^T) x = b given the Cholesky factor L.
Matrix chol_solve(const Matrix& L, const Matrix& b);

// Solves a x = b for symmetric positive definite a. With jitter_allowed,
// one retry is made after adding 1e-10*trace(a)/n to the diagonal.
Matrix spd_solve(const Matrix& a, const Matrix& b, bool jitter_allowed = false);

// Differentiable solve: x = a^-1 b with the factor reused in the adjoint
// (b_bar = a^-1 g, a_bar = -b_bar x^T).
Var spd_solve(const Var& a, const Var& b, bool jitter_allowed = false);

}  // namespace gkcl
