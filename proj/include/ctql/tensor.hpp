#pragma once

#include <cstddef>

#include "ctql/types.hpp"

// Kronecker and symmetric-Kronecker vectorization algebra.
//
// Conventions used throughout the library:
//  * vec() stacks columns (column-major).
//  * Symmetric objects are stored upper-triangular, row by row:
//    (0,0) (0,1) ... (0,n-1) (1,1) (1,2) ... (n-1,n-1).
//  * sym_kron_vec(x) carries the raw products x_i x_j (i <= j); vec_s(P)
//    carries the factor 2 on off-diagonal entries, so that
//    vec_s(P)^T sym_kron_vec(x) == x^T P x.

namespace ctql {

/// Symmetric vectorization of an n x n matrix: n(n+1)/2 entries.
class SymVec {
 public:
  SymVec() = default;
  /// Throws BadLength when the length is not a triangular number.
  explicit SymVec(Vector data);

  const Vector& data() const { return data_; }
  Eigen::Index dim() const { return n_; }
  Eigen::Index size() const { return data_.size(); }
  double operator[](Eigen::Index i) const { return data_[i]; }

 private:
  Vector data_;
  Eigen::Index n_ = 0;
};

/// n(n+1)/2.
constexpr Eigen::Index sym_size(Eigen::Index n) { return n * (n + 1) / 2; }

/// Inverse of sym_size; returns -1 when len is not triangular.
Eigen::Index sym_dim_from_size(Eigen::Index len);

/// Position of (i, j), i <= j, in the upper-triangular row-major ordering.
Eigen::Index sym_index(Eigen::Index n, Eigen::Index i, Eigen::Index j);

Matrix kron(const Matrix& a, const Matrix& b);
Vector kron(const Vector& a, const Vector& b);

/// Column-major vectorization.
Vector vec(const Matrix& m);
/// Inverse of vec for a rows x cols matrix.
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

/// x (x)_S x: products x_i x_j for i <= j.
SymVec sym_kron_vec(const Vector& x);

/// Symmetrized product a (x)_S b with entries (a_i b_j + a_j b_i) / 2, so that
/// vec_s(P)^T sym_kron(a, b) == a^T P b for symmetric P. Reduces to
/// sym_kron_vec when a == b.
Vector sym_kron(const Vector& a, const Vector& b);

/// Throws NotSymmetric when |P - P^T| exceeds tol * max(1, |P|).
SymVec vec_s(const Matrix& p, double tol = 1e-9);
Matrix unvec_s(const SymVec& v);
/// Convenience overload; throws BadLength.
Matrix unvec_s(const Vector& v);

/// Unknown count of the LQR regressions: n(n+1)/2 + m n + m(m+1)/2.
Eigen::Index lqr_unknown_count(Eigen::Index n, Eigen::Index m);

/// Largest singular value; the Euclidean norm for vectors.
double spectral_norm(const Matrix& m);

}  // namespace ctql
