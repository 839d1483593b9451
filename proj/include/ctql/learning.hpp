#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ctql/regression.hpp"

namespace ctql {

struct LearningConfig {
  double eps = 1e-6;         // stop when |P_i - P_{i-1}| (or |W_i - W_{i-1}|) < eps
  int max_iter = 50;
  int intervals = 20;        // regression rows per episode
  double T = 1.0;            // episode length, s
  std::uint64_t seed = 1;    // excitation seed
  double amplitude = 50.0 / 15.0;
  double explore_fraction = 0.2;  // later exploration amplitude relative to |u_i|
  SolveMode mode = SolveMode::Strict;
  int window = 1;            // episodes pooled per off-policy regression (0: all so far)
  double rcond = 0.0;        // least-squares relative singular-value cutoff (0: rank threshold only)
};

enum class TerminationStatus { Converged, MaxIterations, Diverged };

const char* to_string(TerminationStatus s);

/// Flags divergence after three consecutive increases of the iterate change.
class DivergenceMonitor {
 public:
  /// Returns true once the change has grown three times in a row.
  bool update(double delta) {
    growth_ = delta > last_ ? growth_ + 1 : 0;
    last_ = delta;
    return growth_ >= 3;
  }

 private:
  double last_ = std::numeric_limits<double>::infinity();
  int growth_ = 0;
};

template <class Iterate>
struct Trace {
  std::vector<Iterate> iterates;
  TerminationStatus status = TerminationStatus::MaxIterations;
  std::string message;
  int converged_at = -1;     // iteration index where the stopping test first held
  double max_abs_input = 0;  // over every simulated sample
  int episodes = 0;          // episodes simulated by the learner itself
  Vector state_extent;       // per-coordinate max |x| over every simulated sample

  void observe(const std::vector<TrajectorySegment>& segs) {
    for (const auto& seg : segs) {
      for (const auto& s : seg.stages) {
        if (state_extent.size() == 0) state_extent = Vector::Zero(s.x.size());
        state_extent = state_extent.cwiseMax(s.x.cwiseAbs());
        max_abs_input = std::max(max_abs_input, s.u.cwiseAbs().maxCoeff());
      }
    }
  }

  const Iterate& last() const { return iterates.back(); }
};

}  // namespace ctql
