#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ctql/plant.hpp"
#include "ctql/types.hpp"

namespace ctql {

/// Per-interval data of the LQR regressions, one row per interval
/// [t_k, t_{k+1}]. Kronecker products put the input first (u (x) x), so the
/// matching unknown is the column-major vec of an n x m matrix.
struct LqrBank {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Matrix psi;     // x1 (x)_S x1 - x0 (x)_S x0
  Matrix phi;     // int x (x)_S x
  Matrix delta;   // int x (x) x
  Matrix mu;      // int u (x) x
  Matrix nu;      // int u (x)_S u
  Vector xi;      // int r(x, u)
  Vector varrho;  // |x1|^2 - |x0|^2

  Eigen::Index rows() const { return xi.size(); }
};

/// Throws InsufficientRows when fewer than `required_rows` segments are given,
/// or when the segments carry no reward samples.
LqrBank collect_lqr_data(const std::vector<TrajectorySegment>& segments,
                         Eigen::Index required_rows = 1);

/// Append the rows of `more` to `bank`.
void append_rows(LqrBank& bank, const LqrBank& more);

/// One CSV row per interval; header names follow the data symbols.
void write_bank_csv(std::ostream& os, const LqrBank& bank);

struct UnknownBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

/// delta * theta = xi, with rank and condition number kept in sync with delta.
class RegressionSystem {
 public:
  RegressionSystem(Matrix delta, Vector xi, std::vector<UnknownBlock> layout);

  const Matrix& delta() const { return delta_; }
  const Vector& xi() const { return xi_; }
  const std::vector<UnknownBlock>& layout() const { return layout_; }
  const UnknownBlock& block(const std::string& name) const;
  Eigen::Index rank() const { return rank_; }
  /// sigma_max / sigma_min over the numerically nonzero singular values.
  double condition_number() const { return cond_; }
  Eigen::Index unknowns() const { return delta_.cols(); }

  void set_delta(Matrix delta);

 private:
  void refresh();

  Matrix delta_;
  Vector xi_;
  std::vector<UnknownBlock> layout_;
  Eigen::Index rank_ = 0;
  double cond_ = 0.0;
};

/// SVD numerical rank with threshold max(rows, cols) * eps * sigma_max.
Eigen::Index numerical_rank(const Matrix& m);

// ---- LQR assemblies -------------------------------------------------------

/// Off-policy fixed-interval regression:
///   delta_i = [-psi, 2 (mu + vec(D K_i^T)), nu],  xi_i = xi + delta vec(K_i^T Lxu_prev^T),
/// unknowns [vec_s(P); vec(Lambda_xu); vec_s(Lambda_uu)].
RegressionSystem assemble_alg2(const LqrBank& bank, const Matrix& K, const Matrix& Lambda_xu_prev);

/// Time-iterative regression from segments recorded with w = u - u_i:
///   delta = [-psi, 2 eta, I_eu],  rhs = xi,
/// eta = int w (x) x,  I_eu = int (w (x)_S w + 2 u_i (x)_S w).
/// Throws MissingNoiseRecord.
RegressionSystem assemble_alg3(const std::vector<TrajectorySegment>& segments);

struct RankDiagnostic {
  bool satisfied = false;
  Eigen::Index rank = 0;
  Eigen::Index required = 0;
};

/// Richness check on [int x (x) x, int u (x) x, int u (x) u].
RankDiagnostic rank_check(const LqrBank& bank);

// ---- constrained assemblies -----------------------------------------------

struct ConstrainedSetup {
  BasisSpec basis;
  double gamma = 0.0;
  double lambda = 1.0;
};

/// Interval form with data from the behavior policy and the target policy u_i:
///   delta_i = [-psi~, mu~ - phi~_i, nu~],  rhs = xi~ + omega~_i,
/// unknowns [W; Lambda_xu (row-major, m x dim vec grad Phi^T); diag Lambda_uu].
/// omega~_i integrates U(u_i) weighted by the previous diag(Lambda_uu).
RegressionSystem assemble_alg4(const std::vector<TrajectorySegment>& segments,
                               const ControlLaw& target, const ConstrainedSetup& setup,
                               const Vector& Lambda_uu_prev);

/// Exploration form from segments recorded with w = u - u_i:
///   delta = [-psi~, eta~, nu~ - nu~_i],  rhs = xi~.
/// Throws MissingNoiseRecord, SaturationDomain.
RegressionSystem assemble_alg5(const std::vector<TrajectorySegment>& segments,
                               const ConstrainedSetup& setup);

// ---- solving --------------------------------------------------------------

enum class SolveMode { Strict, LeastSquares };

struct ThetaSolution {
  Vector theta;
  double residual = 0.0;  // |delta theta - xi| / |xi|
  Eigen::Index rank = 0;
  double condition_number = 0.0;

  Vector block(const RegressionSystem& sys, const std::string& name) const;
};

/// Strict: QR solve, RankDeficient when delta lacks full column rank.
/// LeastSquares: column-equilibrated minimum-norm SVD solution.
ThetaSolution solve_theta(const RegressionSystem& sys, SolveMode mode, double rcond = 0.0);

}  // namespace ctql
