#pragma once

#include <cstdint>
#include <vector>

#include "ctql/plant.hpp"
#include "ctql/types.hpp"

namespace ctql {

/// Model-based ground truth. Everything here reads A, B, M, R openly; the
/// learning code never calls into this header.

struct OracleSolution {
  Matrix P_star;
  Matrix K_star;
  int iterations = 0;
  double residual = 0.0;  // Frobenius norm of the (shifted) Riccati residual
};

/// Largest real part of the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& a);
bool is_hurwitz(const Matrix& a);

/// Solves A^T P + P A + Q = 0 by vectorization. Throws NotHurwitz.
Matrix lyapunov_solve(const Matrix& A_cl, const Matrix& Q);

/// A^T P + P A + M - P B R^-1 B^T P.
Matrix riccati_residual(const Matrix& A, const Matrix& B, const Matrix& M, const Matrix& R,
                        const Matrix& P);

/// One policy-evaluation step: the P with
/// (A - B K)^T P + P (A - B K) + M + K^T R K = 0.
Matrix kleinman_step(const Matrix& A, const Matrix& B, const Matrix& M, const Matrix& R,
                     const Matrix& K);

/// Kleinman iteration from a stabilizing K0 (u = -K x). Stops when
/// |P_i - P_{i-1}| < tol. Throws NotHurwitz if an iterate stops stabilizing,
/// Diverged if the Loewner-monotone decrease is violated.
OracleSolution kleinman(const Matrix& A, const Matrix& B, const Matrix& M, const Matrix& R,
                        const Matrix& K0, double tol = 1e-10, int max_iter = 100);

/// Unconstrained discounted LQT: Kleinman on (F - gamma/2 I, G) with state
/// cost C^T M C. The initial gain is zero when the shifted matrix is already
/// Hurwitz, otherwise it comes from the true-model LMI. Throws NotStabilizable.
OracleSolution discounted_lqt_oracle(const Matrix& F, const Matrix& G, const Matrix& C,
                                     const Matrix& M, const Matrix& R, double gamma);

/// Parameters of the input-constrained problem on the augmented state.
struct ConstrainedProblem {
  Matrix F;
  Matrix G;
  Matrix Q;       // state cost on the learning coordinates (C^T M C)
  Vector r_diag;  // diagonal of R
  double gamma = 0.0;
  double lambda = 1.0;
  BasisSpec basis;
};

struct ConstrainedOracleSolution {
  Vector W;
  Matrix K;         // basis gain, m x dim vec(grad Phi^T)
  Matrix K_linear;  // effective linear gain (quadratic basis)
  int iterations = 0;
  double residual = 0.0;  // RMS Hamiltonian residual at W over the samples
};

/// Basis gain of the greedy policy for weights W:
/// K = 1/2 R^-1 Lambda_xu with Lambda_xu[j, k + N a] = G(k, j) W(a).
Matrix greedy_basis_gain(const ConstrainedProblem& prob, const Vector& W);

/// RMS over the samples of the Hamiltonian at the greedy policy of W:
/// W^T grad Phi (F X + G u) - gamma W^T Phi + X^T Q X + U(u).
double hamiltonian_residual(const ConstrainedProblem& prob, const Vector& W,
                            const std::vector<Vector>& samples);

/// `count` states uniform in the box [-half_width, half_width], fixed seed.
std::vector<Vector> sample_box(const Vector& half_width, int count, std::uint64_t seed);

/// Model-based policy iteration on the sample set, starting from the basis
/// gain K0. Each step fits W by least squares to the policy-evaluation
/// equation and takes the greedy policy. Stops when |W_i - W_{i-1}| < tol.
/// Throws Diverged when the fit residual grows three steps in a row.
ConstrainedOracleSolution constrained_pi_oracle(const ConstrainedProblem& prob, const Matrix& K0,
                                                const std::vector<Vector>& samples,
                                                double tol = 1e-8, int max_iter = 200);

}  // namespace ctql
