#pragma once

#include <vector>

#include "ctql/types.hpp"

namespace ctql {

/// Symmetric affine constraint F(y) = F0 + sum_i y_i F_i. With `margin` set
/// the constraint reads F(y) >= t I, otherwise F(y) > 0.
struct LmiConstraint {
  Matrix F0;
  std::vector<Matrix> Fi;
  bool margin = true;
};

struct SdpResult {
  Vector y;
  double margin = 0.0;  // t at the returned point
  int newton_steps = 0;
};

/// Maximizes t over (y, t) subject to the constraints with a log-det barrier
/// and damped Newton steps. `y0` must satisfy every constraint without a
/// margin strictly. Returns the best point found; the caller decides whether
/// the margin certifies feasibility. Throws DimensionMismatch, Infeasible
/// when y0 violates a margin-free constraint.
SdpResult maximize_margin(const std::vector<LmiConstraint>& constraints, const Vector& y0,
                          double gap_tol = 1e-9, double margin_cap = 1e6);

}  // namespace ctql
