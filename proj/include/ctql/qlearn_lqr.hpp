#pragma once

#include "ctql/learning.hpp"
#include "ctql/plant.hpp"
#include "ctql/regression.hpp"

namespace ctql {

struct SolutionIterate {
  int iter = 0;
  Matrix P;
  Matrix Lambda_xu;  // n x m
  Matrix Lambda_uu;  // m x m
  Matrix K;          // Lambda_uu^-1 Lambda_xu^T, the next policy
  double residual = 0.0;
  double delta_P = std::numeric_limits<double>::infinity();
  double condition_number = 0.0;
  Eigen::Index rank = 0;
  double bias = 0.0;            // probing-noise term int e^T H_uu e (on-policy baseline)
  double max_state_norm = 0.0;  // over the episode used by this iteration
};

using LqrTrace = Trace<SolutionIterate>;

/// Off-policy fixed-interval learner on a data bank collected once.
/// Throws RankDeficient when the bank fails the richness check.
LqrTrace alg2_run(const LqrBank& bank, const Matrix& K0, const LearningConfig& cfg);

/// Time-iterative learner: one fresh episode per iteration under
/// u = -K_i x + w. The first episode uses cfg.amplitude; every later one uses
/// cfg.explore_fraction of the peak |K_1 x| over the first episode.
LqrTrace alg3_run(Plant& plant, const Matrix& K0, const LearningConfig& cfg);

struct OnPolicyOptions {
  bool reset_allowed = true;
  std::uint64_t reset_seed = 7;
};

/// On-policy baseline. The value step fits P_i from episodes run under
/// u_i = -K_i x (random resets, or a single continued episode with probing
/// noise); the Q step reuses `bank0` collected under the behavior policy.
LqrTrace alg1_run(Plant& plant, const LqrBank& bank0, const Matrix& K0, const LearningConfig& cfg,
                  const OnPolicyOptions& opts);

}  // namespace ctql
