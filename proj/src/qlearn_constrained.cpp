#include "ctql/qlearn_constrained.hpp"

#include <cmath>
#include <deque>

#include "ctql/error.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

namespace {

constexpr double kConditionLimit = 1e10;

ConstrainedIterate unpack(const RegressionSystem& sys, const ThetaSolution& sol,
                          const ConstrainedSetup& setup, Eigen::Index m) {
  const Eigen::Index q = setup.basis.grad_vec_size();
  ConstrainedIterate it;
  it.W = sol.block(sys, "W");
  const Vector lxu = sol.block(sys, "Lambda_xu");
  it.Lambda_xu = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(lxu.data(), m, q);
  it.Lambda_uu = sol.block(sys, "Lambda_uu");
  it.K = 0.5 * it.Lambda_uu.cwiseInverse().asDiagonal() * it.Lambda_xu;
  it.K_linear = effective_linear_gain(it.K, setup.basis);
  it.residual = sol.residual;
  it.condition_number = sol.condition_number;
  it.rank = sol.rank;
  return it;
}

double episode_max_input(const std::vector<TrajectorySegment>& segs, double lambda) {
  double out = 0.0;
  for (const auto& seg : segs) {
    for (const auto& s : seg.stages) out = std::max(out, s.u.cwiseAbs().maxCoeff());
  }
  if (!(out < lambda)) {
    throw Error(ErrorCode::SaturationDomain,
                "applied input reached " + std::to_string(out) + " >= lambda");
  }
  return out;
}

// Re-expresses recorded exploration against a new target policy.
void relabel(std::vector<TrajectorySegment>& segs, const ControlLaw& target) {
  for (auto& seg : segs) {
    for (auto* list : {&seg.samples, &seg.stages}) {
      for (Sample& s : *list) s.w = s.u - target(s.t, s.x);
    }
    seg.has_noise = true;
  }
}

void check_setup(const Matrix& K0, const ConstrainedSetup& setup, Eigen::Index m) {
  if (K0.rows() != m || K0.cols() != setup.basis.grad_vec_size()) {
    throw Error(ErrorCode::DimensionMismatch, "K0 must be an m x dim vec(grad Phi^T) basis gain");
  }
  if (!(setup.lambda > 0.0)) throw Error(ErrorCode::SaturationDomain, "lambda must be positive");
}

// Returns true when the loop should stop.
bool record(ConstrainedTrace& trace, ConstrainedIterate it, const LearningConfig& cfg,
            DivergenceMonitor& mon) {
  if (!trace.iterates.empty()) it.delta_W = (it.W - trace.last().W).norm();
  const double delta = it.delta_W;
  trace.iterates.push_back(std::move(it));
  if (delta < cfg.eps) {
    trace.status = TerminationStatus::Converged;
    trace.converged_at = trace.last().iter;
    return true;
  }
  if (std::isfinite(delta) && mon.update(delta)) {
    trace.status = TerminationStatus::Diverged;
    trace.message = "weight change grew three times in a row";
    return true;
  }
  return false;
}

}  // namespace

ConstrainedTrace alg4_run(Plant& plant, const Matrix& K0, const ConstrainedSetup& setup,
                          const LearningConfig& cfg) {
  const Eigen::Index m = plant.input_dim();
  check_setup(K0, setup, m);
  const ControlLaw behavior = behavior_policy(cfg.seed, cfg.amplitude, m, setup.lambda);
  ConstrainedTrace trace;
  DivergenceMonitor mon;
  Matrix K = K0;
  Vector Luu_prev = Vector::Ones(m);
  std::deque<std::vector<TrajectorySegment>> pool;
  for (int i = 0; i < cfg.max_iter; ++i) {
    std::vector<TrajectorySegment> segs;
    try {
      segs = plant.run_episode(behavior, cfg.T, cfg.intervals);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteState) throw;
      trace.status = TerminationStatus::Diverged;
      trace.message = e.what();
      break;
    }
    ++trace.episodes;
    const double peak = episode_max_input(segs, setup.lambda);
    trace.observe(segs);

    // Behavior data does not depend on the target, so earlier episodes stay valid.
    pool.push_back(std::move(segs));
    if (cfg.window > 0 && static_cast<int>(pool.size()) > cfg.window) pool.pop_front();
    std::vector<TrajectorySegment> rows;
    for (const auto& ep : pool) rows.insert(rows.end(), ep.begin(), ep.end());

    const ControlLaw target = saturated_policy(K, setup.lambda, setup.basis);
    const RegressionSystem sys = assemble_alg4(rows, target, setup, Luu_prev);
    ConstrainedIterate it = unpack(sys, solve_theta(sys, cfg.mode, cfg.rcond), setup, m);
    it.iter = i;
    it.max_abs_input = peak;
    K = it.K;
    Luu_prev = it.Lambda_uu;
    if (record(trace, std::move(it), cfg, mon)) break;
  }
  return trace;
}

ConstrainedTrace alg5_run(Plant& plant, const Matrix& K0, const ConstrainedSetup& setup,
                          const LearningConfig& cfg) {
  const Eigen::Index m = plant.input_dim();
  check_setup(K0, setup, m);
  const SinusoidSum raw(cfg.seed, cfg.amplitude, m);
  const double lambda = setup.lambda;
  const BasisSpec basis = setup.basis;
  ConstrainedTrace trace;
  DivergenceMonitor mon;
  Matrix K = K0;
  std::deque<std::vector<TrajectorySegment>> pool;
  for (int i = 0; i < cfg.max_iter; ++i) {
    const ControlLaw target = saturated_policy(K, lambda, basis);
    const ControlLaw policy = [K, raw, lambda, basis](double t, const Vector& x) {
      return soft_saturate(Vector(-K * basis.grad_vec(x) + raw(t)), lambda);
    };
    std::vector<TrajectorySegment> segs;
    try {
      segs = plant.run_episode(policy, cfg.T, cfg.intervals, &target);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteState) throw;
      trace.status = TerminationStatus::Diverged;
      trace.message = e.what();
      break;
    }
    ++trace.episodes;
    const double peak = episode_max_input(segs, lambda);
    trace.observe(segs);

    pool.push_back(std::move(segs));
    if (cfg.window > 0 && static_cast<int>(pool.size()) > cfg.window) pool.pop_front();
    std::vector<TrajectorySegment> rows;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      // Older episodes were explored around earlier policies.
      if (k + 1 < pool.size()) relabel(pool[k], target);
      rows.insert(rows.end(), pool[k].begin(), pool[k].end());
    }

    const RegressionSystem sys = assemble_alg5(rows, setup);
    const ThetaSolution sol = solve_theta(sys, cfg.mode, cfg.rcond);
    if (sol.condition_number > kConditionLimit) {
      throw Error(ErrorCode::NumericallyIllConditioned,
                  "regression condition number " + std::to_string(sol.condition_number));
    }
    ConstrainedIterate it = unpack(sys, sol, setup, m);
    it.iter = i;
    it.max_abs_input = peak;
    K = it.K;
    if (record(trace, std::move(it), cfg, mon)) break;
  }
  return trace;
}

TrackingReport tracking_error_report(const LtiSystem& augmented, const Matrix& K,
                                     const ConstrainedSetup& setup, const Vector& X0,
                                     Eigen::Index plant_dim, double duration, double dt) {
  const ControlLaw policy = saturated_policy(K, setup.lambda, setup.basis);
  const TrajectorySegment seg = simulate_segment(augmented, policy, X0, 0.0, duration, dt);
  TrackingReport rep;
  const double tail_start = 0.75 * duration;
  double sum = 0.0;
  long count = 0;
  for (const Sample& s : seg.samples) {
    rep.max_abs_input = std::max(rep.max_abs_input, s.u.cwiseAbs().maxCoeff());
    if (s.t >= tail_start) {
      sum += s.x.head(plant_dim).squaredNorm();
      ++count;
    }
  }
  rep.rms_error = count > 0 ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
  return rep;
}

}  // namespace ctql
