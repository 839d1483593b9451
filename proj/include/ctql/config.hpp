#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "ctql/types.hpp"

namespace ctql {

enum class Problem { Feedback, Tracking };
enum class Algorithm { Alg1, Alg2, Alg3, Alg4, Alg5 };

std::string_view to_string(Problem p);
std::string_view to_string(Algorithm a);

/// One learning campaign. Files are flat `key = value` text, `#` starts a
/// comment, matrices are written row by row: `A = -1, 0.9; 0.8, -1`.
struct CampaignConfig {
  std::string name = "campaign";
  Problem problem = Problem::Feedback;
  Algorithm algorithm = Algorithm::Alg2;

  Matrix A, B;
  Matrix A_r;  // tracking only
  Matrix M, R;
  double gamma = 0.0;
  double lambda = std::numeric_limits<double>::infinity();
  Vector x0;   // plant initial state (tracking default: 0)
  Vector xr0;  // tracking reference initial state (tracking error starts at -xr0)

  int episodes = 39;      // training budget, one episode per iteration
  int bank_episodes = 4;  // behavior episodes in the off-policy data bank
  double T = 1.0;
  double dt = 1e-4;
  int intervals = 20;
  std::uint64_t seed = 1;
  double amplitude = 50.0 / 15.0;
  double eps = 1e-6;
  int max_iter = 39;
  int window = 0;  // pooled behavior episodes for alg4/alg5 (0: all)
  bool resets = true;  // alg1 only
  std::string out = "out";

  bool constrained() const {
    return algorithm == Algorithm::Alg4 || algorithm == Algorithm::Alg5;
  }
  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  /// Throws Config when dimensions or ranges are inconsistent.
  void validate() const;
  /// Canonical key = value text; parse_config(render()) reproduces the config.
  std::string render() const;
};

/// Throws Config on unknown keys, malformed numbers, or a failed validate().
CampaignConfig parse_config(std::string_view text);
CampaignConfig load_config(const std::string& path);

}  // namespace ctql
