#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ctql/types.hpp"

namespace ctql {

/// x' = A x + B u.
struct LtiSystem {
  Matrix A;
  Matrix B;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  /// Throws DimensionMismatch.
  void validate() const;
};

/// Tracking augmentation with state X = [x - x_r; x_r]:
///   F = [[A, A - A_r], [0, A_r]],  G = [B; 0].
struct AugmentedSystem {
  Matrix F;
  Matrix G;
  Matrix A_r;

  Eigen::Index plant_dim() const { return A_r.rows(); }
  LtiSystem dynamics() const { return {F, G}; }
};

AugmentedSystem augment(const Matrix& A, const Matrix& B, const Matrix& A_r);

/// Hidden running cost. Learners only ever see reward(); the weights stay
/// private so that the learning code cannot peek at them.
///
/// Unconstrained: r = x^T Q x + u^T R u.
/// Constrained:   r = x^T Q x + U(u), U(u) = 2 int_0^u (lambda atanh(v/lambda))^T R dv,
///                with R diagonal.
class CostOracle {
 public:
  static CostOracle quadratic(Matrix Q, Matrix R);
  static CostOracle constrained(Matrix Q, Vector r_diag, double lambda);

  double reward(const Vector& x, const Vector& u) const;
  bool is_constrained() const { return std::isfinite(lambda_); }
  double bound() const { return lambda_; }

 private:
  CostOracle() = default;
  Matrix Q_;
  Matrix R_;
  double lambda_ = std::numeric_limits<double>::infinity();
};

/// Guard band applied before atanh / log1p so the barrier stays finite.
inline constexpr double kSaturationGuard = 1.0 - 1e-9;

/// Closed form of U(u) = sum_j r_j [2 lambda u_j atanh(u_j/lambda) + lambda^2 ln(1 - u_j^2/lambda^2)].
/// Throws SaturationDomain when any |u_j| >= lambda.
double constrained_cost_U(const Vector& u, const Vector& r_diag, double lambda);
/// dU/du_j = 2 lambda r_j atanh(u_j / lambda).
Vector constrained_cost_gradient(const Vector& u, const Vector& r_diag, double lambda);
/// int_0^u (lambda atanh(v/lambda))^T diag(weights) dv  (that is U(u)/2 with R = diag(weights)).
double saturation_inner_integral(const Vector& u, const Vector& weights, double lambda);
/// Per-channel barrier features: 2 lambda u_j atanh(u_j/lambda) + lambda^2 ln(1 - (u_j/lambda)^2).
Vector barrier_features(const Vector& u, double lambda);

/// lambda * tanh(v / lambda), kept strictly inside the guard band.
Vector soft_saturate(const Vector& v, double lambda);

using ControlLaw = std::function<Vector(double t, const Vector& x)>;

/// Sum-of-sinusoids excitation  u_j(t) = amplitude * sum_{i=1..100} sin(omega_ij t),
/// omega drawn uniformly from [-500, 500] from the seed.
class SinusoidSum {
 public:
  SinusoidSum(std::uint64_t seed, double amplitude, Eigen::Index channels = 1,
              int terms = 100, double max_frequency = 500.0);
  Vector operator()(double t) const;
  double amplitude() const { return amplitude_; }
  SinusoidSum scaled(double amplitude) const;

 private:
  double amplitude_;
  Matrix omegas_;  // channels x terms
};

/// Behavior policy; when lambda is finite the raw signal is passed through
/// lambda * tanh(. / lambda) so every sample satisfies |u_j| < lambda.
ControlLaw behavior_policy(std::uint64_t seed, double amplitude, Eigen::Index channels = 1,
                           double lambda = std::numeric_limits<double>::infinity());

/// Feature map Phi(X) and its Jacobian (rows: features, cols: state).
struct BasisSpec {
  Eigen::Index state_dim = 0;
  Eigen::Index size = 0;
  std::function<Vector(const Vector&)> features;
  std::function<Matrix(const Vector&)> jacobian;

  /// vec(grad Phi^T(X)): column-major vectorization of the state_dim x size
  /// transposed Jacobian.
  Vector grad_vec(const Vector& x) const;
  Eigen::Index grad_vec_size() const { return state_dim * size; }
};

/// Phi(X) = X (x)_S X.
BasisSpec quadratic_basis(Eigen::Index state_dim);

/// Linear gain K_lin (m x N) equivalent to a basis gain K (m x N*p), i.e.
/// K vec(grad Phi^T(X)) = K_lin X. Exact only for bases whose gradient is
/// linear in the state (the quadratic basis).
Matrix effective_linear_gain(const Matrix& K, const BasisSpec& basis);
/// Minimum-norm basis gain K with K vec(grad Phi^T(X)) = K_lin X.
Matrix basis_gain_from_linear(const Matrix& K_lin, const BasisSpec& basis);

/// u(x) = -lambda tanh(K vec(grad Phi^T(x)) / lambda).
ControlLaw saturated_policy(Matrix K, double lambda, BasisSpec basis);
/// u(x) = -K x.
ControlLaw linear_policy(Matrix K);

struct Sample {
  double t = 0.0;
  Vector x;
  Vector u;
  Vector w;  // u - target(x); empty when no target policy was supplied
  double r = std::numeric_limits<double>::quiet_NaN();
};

/// One simulated interval. `samples` holds the grid points, `stages` the four
/// Runge-Kutta stage points of every step; integrate() replays the stage
/// points with the same weights as the state update.
struct TrajectorySegment {
  double t0 = 0.0;
  double t1 = 0.0;
  double h = 0.0;
  std::vector<Sample> samples;
  std::vector<Sample> stages;
  bool has_noise = false;
  bool has_reward = false;

  const Vector& x0() const { return samples.front().x; }
  const Vector& x1() const { return samples.back().x; }
  Eigen::Index steps() const { return static_cast<Eigen::Index>(samples.size()) - 1; }
};

/// int_{t0}^{t1} e^{-gamma (tau - t0)} g(sample(tau)) dtau with the Runge-Kutta
/// stage weights h/6 (1, 2, 2, 1).
template <class Integrand>
Vector integrate(const TrajectorySegment& seg, Integrand&& g, double gamma = 0.0) {
  static constexpr double kWeights[4] = {1.0, 2.0, 2.0, 1.0};
  Vector acc;
  for (std::size_t s = 0; s < seg.stages.size(); ++s) {
    const Sample& st = seg.stages[s];
    double w = seg.h / 6.0 * kWeights[s % 4];
    if (gamma != 0.0) w *= std::exp(-gamma * (st.t - seg.t0));
    Vector v = g(st);
    if (acc.size() == 0) acc = Vector::Zero(v.size());
    acc.noalias() += w * v;
  }
  return acc;
}

/// Fixed-step RK4 from t0 to t1. `oracle` (optional) fills the reward of every
/// sample; `target` (optional) records w = u - target(x). Throws
/// NonFiniteState, or DimensionMismatch on bad arguments.
TrajectorySegment simulate_segment(const LtiSystem& sys, const ControlLaw& policy,
                                   const Vector& x0, double t0, double t1, double dt,
                                   const CostOracle* oracle = nullptr,
                                   const ControlLaw* target = nullptr);

/// The environment seen by the learning loops: it can be driven, observed and
/// (when allowed) reset, but never asked for its model.
class Plant {
 public:
  Plant(LtiSystem sys, CostOracle oracle, Vector x0, double dt, double t0 = 0.0);

  /// Simulates one episode of length T split into `intervals` equal segments,
  /// continuing from the current state and time.
  std::vector<TrajectorySegment> run_episode(const ControlLaw& policy, double T, int intervals,
                                             const ControlLaw* target = nullptr);
  void reset(const Vector& x0);

  const Vector& state() const { return x_; }
  double time() const { return t_; }
  double dt() const { return dt_; }
  Eigen::Index state_dim() const { return sys_.n(); }
  Eigen::Index input_dim() const { return sys_.m(); }
  /// Largest |u_j| seen since construction.
  double max_abs_input() const { return max_abs_u_; }

 private:
  LtiSystem sys_;
  CostOracle oracle_;
  Vector x_;
  double t_;
  double dt_;
  double max_abs_u_ = 0.0;
};

}  // namespace ctql
