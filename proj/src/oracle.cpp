#include "ctql/oracle.hpp"

#include <cmath>
#include <random>

#include "ctql/error.hpp"
#include "ctql/stabilizer.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

double spectral_abscissa(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "matrix must be square");
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  return Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Matrix& a) { return spectral_abscissa(a) < 0.0; }

Matrix lyapunov_solve(const Matrix& A_cl, const Matrix& Q) {
  const Eigen::Index n = A_cl.rows();
  if (A_cl.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "lyapunov_solve: shapes differ");
  }
  if (!is_hurwitz(A_cl)) {
    throw Error(ErrorCode::NotHurwitz, "lyapunov_solve: closed loop has spectral abscissa " +
                                           std::to_string(spectral_abscissa(A_cl)));
  }
  const Matrix I = Matrix::Identity(n, n);
  const Matrix L = kron(I, Matrix(A_cl.transpose())) + kron(Matrix(A_cl.transpose()), I);
  const Vector p = L.partialPivLu().solve(Vector(-vec(Q)));
  const Matrix P = unvec(p, n, n);
  return 0.5 * (P + P.transpose());
}

Matrix riccati_residual(const Matrix& A, const Matrix& B, const Matrix& M, const Matrix& R,
                        const Matrix& P) {
  return A.transpose() * P + P * A + M - P * B * R.ldlt().solve(B.transpose() * P);
}

Matrix kleinman_step(const Matrix& A, const Matrix& B, const Matrix& M, const Matrix& R,
                     const Matrix& K) {
  return lyapunov_solve(A - B * K, M + K.transpose() * R * K);
}

OracleSolution kleinman(const Matrix& A, const Matrix& B, const Matrix& M, const Matrix& R,
                        const Matrix& K0, double tol, int max_iter) {
  LtiSystem{A, B}.validate();
  Matrix K = K0;
  Matrix P_prev;
  OracleSolution sol;
  for (int i = 0; i < max_iter; ++i) {
    const Matrix P = kleinman_step(A, B, M, R, K);
    sol.iterations = i + 1;
    if (P_prev.size() != 0) {
      // P_{i-1} >= P_i in the Loewner order.
      const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(P_prev - P, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .minCoeff();
      if (lmin < -1e-8 * std::max(1.0, P.norm())) {
        throw Error(ErrorCode::Diverged, "kleinman: Loewner decrease violated by " +
                                             std::to_string(lmin));
      }
    }
    K = R.ldlt().solve(B.transpose() * P);
    const bool done = P_prev.size() != 0 && (P - P_prev).norm() < tol;
    P_prev = P;
    if (done) break;
  }
  sol.P_star = P_prev;
  sol.K_star = K;
  sol.residual = riccati_residual(A, B, M, R, sol.P_star).norm();
  return sol;
}

OracleSolution discounted_lqt_oracle(const Matrix& F, const Matrix& G, const Matrix& C,
                                     const Matrix& M, const Matrix& R, double gamma) {
  const Eigen::Index N = F.rows();
  const Matrix Fs = F - 0.5 * gamma * Matrix::Identity(N, N);
  Matrix K0 = Matrix::Zero(G.cols(), N);
  if (!is_hurwitz(Fs)) K0 = model_lmi_gain(Fs, G).K;
  if (!is_hurwitz(Fs - G * K0)) {
    throw Error(ErrorCode::NotStabilizable, "discounted LQT: no stabilizing initial gain");
  }
  return kleinman(Fs, G, C.transpose() * M * C, R, K0);
}

// ---------------------------------------------------------------------------

Matrix greedy_basis_gain(const ConstrainedProblem& prob, const Vector& W) {
  const Eigen::Index N = prob.basis.state_dim, p = prob.basis.size, m = prob.G.cols();
  Matrix K(m, N * p);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index k = 0; k < N; ++k) {
        K(j, k + N * a) = 0.5 * prob.G(k, j) * W[a] / prob.r_diag[j];
      }
    }
  }
  return K;
}

namespace {

Vector policy_input(const ConstrainedProblem& prob, const Matrix& K, const Vector& X) {
  const Vector v = K * prob.basis.grad_vec(X);
  return -prob.lambda * (v.array() / prob.lambda).tanh().matrix();
}

// One row of the policy-evaluation equation
//   W^T [grad Phi (F X + G u) - gamma Phi] = -(X^T Q X + U(u)).
void evaluation_row(const ConstrainedProblem& prob, const Vector& X, const Vector& u,
                    Eigen::Ref<Vector> row, double& rhs) {
  row = prob.basis.jacobian(X) * (prob.F * X + prob.G * u) - prob.gamma * prob.basis.features(X);
  rhs = -(X.dot(prob.Q * X) + constrained_cost_U(u, prob.r_diag, prob.lambda));
}

}  // namespace

double hamiltonian_residual(const ConstrainedProblem& prob, const Vector& W,
                            const std::vector<Vector>& samples) {
  if (samples.empty()) return 0.0;
  const Matrix K = greedy_basis_gain(prob, W);
  Vector row(prob.basis.size);
  double sum = 0.0;
  for (const Vector& X : samples) {
    double rhs = 0.0;
    evaluation_row(prob, X, policy_input(prob, K, X), row, rhs);
    const double h = row.dot(W) - rhs;
    sum += h * h;
  }
  return std::sqrt(sum / static_cast<double>(samples.size()));
}

std::vector<Vector> sample_box(const Vector& half_width, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Vector x(half_width.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = half_width[i] * unit(rng);
    out.push_back(std::move(x));
  }
  return out;
}

ConstrainedOracleSolution constrained_pi_oracle(const ConstrainedProblem& prob, const Matrix& K0,
                                                const std::vector<Vector>& samples, double tol,
                                                int max_iter) {
  const Eigen::Index p = prob.basis.size;
  const auto rows = static_cast<Eigen::Index>(samples.size());
  if (rows < p) {
    throw Error(ErrorCode::InsufficientRows, "constrained oracle: fewer samples than weights");
  }
  if (K0.rows() != prob.G.cols() || K0.cols() != prob.basis.grad_vec_size()) {
    throw Error(ErrorCode::DimensionMismatch, "constrained oracle: K0 must be a basis gain");
  }
  Matrix K = K0;
  Vector W_prev;
  ConstrainedOracleSolution sol;
  double last_fit = std::numeric_limits<double>::infinity();
  int growth = 0;
  Matrix D(rows, p);
  Vector rhs(rows);
  for (int i = 0; i < max_iter; ++i) {
    for (Eigen::Index k = 0; k < rows; ++k) {
      const Vector& X = samples[static_cast<std::size_t>(k)];
      Vector row(p);
      evaluation_row(prob, X, policy_input(prob, K, X), row, rhs[k]);
      D.row(k) = row.transpose();
    }
    // Minimum norm, so weights on coordinates the samples never excite stay 0.
    const Vector W = D.completeOrthogonalDecomposition().solve(rhs);
    if (!W.allFinite()) throw Error(ErrorCode::Diverged, "constrained oracle: non-finite weights");
    // Growth below the relative noise floor is roundoff, not divergence.
    const double fit = hamiltonian_residual(prob, W, samples);
    growth = fit > last_fit * (1.0 + 1e-6) + 1e-14 ? growth + 1 : 0;
    if (growth >= 3) {
      throw Error(ErrorCode::Diverged, "constrained oracle: residual grew three steps in a row");
    }
    last_fit = fit;
    K = greedy_basis_gain(prob, W);
    sol.iterations = i + 1;
    const bool done = W_prev.size() != 0 && (W - W_prev).norm() < tol;
    W_prev = W;
    if (done) break;
  }
  sol.W = W_prev;
  sol.K = K;
  sol.K_linear = effective_linear_gain(K, prob.basis);
  sol.residual = hamiltonian_residual(prob, sol.W, samples);
  return sol;
}

}  // namespace ctql
