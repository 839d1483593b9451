#pragma once

#include "ctql/learning.hpp"
#include "ctql/plant.hpp"
#include "ctql/regression.hpp"

namespace ctql {

struct ConstrainedIterate {
  int iter = 0;
  Vector W;
  Matrix Lambda_xu;  // m x dim vec(grad Phi^T)
  Vector Lambda_uu;  // diagonal, m entries
  Matrix K;          // 1/2 diag(Lambda_uu)^-1 Lambda_xu, the next basis gain
  Matrix K_linear;   // equivalent linear gain (quadratic basis)
  double residual = 0.0;
  double delta_W = std::numeric_limits<double>::infinity();
  double condition_number = 0.0;
  Eigen::Index rank = 0;
  double max_abs_input = 0.0;  // over the episode used by this iteration
};

using ConstrainedTrace = Trace<ConstrainedIterate>;

/// Interval-data learner: a fresh behavior episode per iteration, the
/// target policy u_i = -lambda tanh(K_i vec(grad Phi^T) / lambda) enters
/// through the regression only. Throws SaturationDomain if any applied input
/// leaves (-lambda, lambda).
ConstrainedTrace alg4_run(Plant& plant, const Matrix& K0, const ConstrainedSetup& setup,
                          const LearningConfig& cfg);

/// Exploration learner: each episode runs u = lambda tanh((-K_i z + w) / lambda),
/// so u stays inside the bound and w = u - u_i is recorded. Throws
/// SaturationDomain, NumericallyIllConditioned when cond(delta) > 1e10.
ConstrainedTrace alg5_run(Plant& plant, const Matrix& K0, const ConstrainedSetup& setup,
                          const LearningConfig& cfg);

struct TrackingReport {
  double rms_error = 0.0;  // RMS |x - x_r| over the last quarter of the horizon
  double max_abs_input = 0.0;
};

/// Simulates the saturated policy of the basis gain K on the augmented
/// dynamics from X0 for `duration` seconds.
TrackingReport tracking_error_report(const LtiSystem& augmented, const Matrix& K,
                                     const ConstrainedSetup& setup, const Vector& X0,
                                     Eigen::Index plant_dim, double duration, double dt = 1e-3);

}  // namespace ctql
