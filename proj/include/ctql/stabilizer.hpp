#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ctql/plant.hpp"
#include "ctql/regression.hpp"
#include "ctql/types.hpp"

namespace ctql {

// ---- LMI initializer ------------------------------------------------------

struct PiBEstimate {
  Matrix Pi;  // estimate of A + A^T
  Matrix B;
  double residual = 0.0;  // relative fit residual
};

/// Least-squares fit of |x1|^2 - |x0|^2 = vec_s(Pi)^T phi + 2 vec(B)^T mu.
/// Throws RankDeficient when [phi, 2 mu] lacks full column rank.
PiBEstimate estimate_pi_b(const LqrBank& bank);

/// Ingredients of  -(S Pi + Pi S - Gamma(S) - varpi B B^T) > 0,  S > 0.
/// Gamma must be linear in S.
struct LmiData {
  Matrix Pi;
  Matrix B;
  std::function<Matrix(const Matrix&)> gamma_xx;
};

struct LmiResult {
  Matrix K;  // u = -K x
  Matrix S;
  double varpi = 0.0;
  double margin = 0.0;
};

/// K = varpi / 2 * B^T S^-1.
Matrix lmi_gain(const Matrix& S, double varpi, const Matrix& B);

/// Maximizes the strict-feasibility margin with S <= I and varpi in
/// [1e-6, cap], raising the cap by decades up to 1e6 until the margin reaches
/// 1e-7. Throws Infeasible.
LmiResult solve_stabilizing_lmi(const LmiData& data);

/// Data-driven stabilizing gain from a behavior bank.
/// Throws RankDeficient, Infeasible.
LmiResult lmi_stabilizing_gain(const LqrBank& bank);

/// Same LMI with exact A, B (Gamma(S) = A^T S + S A). Throws NotStabilizable.
LmiResult model_lmi_gain(const Matrix& A, const Matrix& B);

// ---- Gramian initializer for constrained tracking -------------------------

/// Trajectories from `count` reset states drawn uniformly from the unit ball,
/// each of length T split into `intervals` segments. The input is zero unless
/// a policy is given.
std::vector<TrajectorySegment> collect_reset_segments(Plant& plant, int count, double T,
                                                      int intervals, std::uint64_t seed,
                                                      const ControlLaw* policy = nullptr);

/// Fits int r = vec_s(M)^T int (C X) (x)_S (C X) on zero-input data and
/// projects the result onto the PSD cone. Throws RankDeficient.
Matrix estimate_M(const std::vector<TrajectorySegment>& resets, const Matrix& C);

struct GramianResult {
  Matrix S;
  Matrix K_hyp;  // linear gain B_hat^T S on the learning state
  double residual = 0.0;
};

/// Returns true when the gain keeps the saturated closed loop bounded.
using AdmissibilityCheck = std::function<bool(const Matrix& K_linear)>;

/// Solves (sigma - gamma rho) vec_s(S) = -rho vec_s(C^T M C) in least squares
/// and forms K_hyp = B_hat^T S. When `check` is given and rejects K_hyp,
/// throws NotAdmissible. Throws RankDeficient.
GramianResult gramian_admissible_gain(const std::vector<TrajectorySegment>& resets, double gamma,
                                      const Matrix& M_hat, const Matrix& C, const Matrix& B_hat,
                                      const AdmissibilityCheck* check = nullptr);

/// Simulates u = -lambda tanh(K X / lambda) on the plant dynamics for
/// `horizon` seconds from X0; bounded when |X(t)| <= 10 |X0| throughout.
AdmissibilityCheck bounded_closed_loop_check(LtiSystem sys, Vector X0, double lambda,
                                             double horizon = 20.0, double dt = 1e-3);

struct SearchResult {
  Matrix K;
  double scale = 0.0;
};

/// First c in `grid` (in order) whose scaled gain c K_hyp passes `check`.
/// Throws SearchExhausted.
SearchResult admissible_search(const Matrix& K_hyp, const std::vector<double>& grid,
                               const AdmissibilityCheck& check);

/// Tried in this order, so K_hyp itself comes first.
inline const std::vector<double> kDefaultScaleGrid = {1.0, 0.5, 2.0, 0.25, 4.0};

}  // namespace ctql
