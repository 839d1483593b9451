#include "ctql/qlearn_lqr.hpp"

#include <cmath>
#include <random>

#include "ctql/error.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

namespace {

SolutionIterate unpack(const RegressionSystem& sys, const ThetaSolution& sol, Eigen::Index n,
                       Eigen::Index m) {
  SolutionIterate it;
  it.P = unvec_s(Vector(sol.block(sys, "P")));
  it.Lambda_xu = unvec(sol.block(sys, "Lambda_xu"), n, m);
  it.Lambda_uu = unvec_s(Vector(sol.block(sys, "Lambda_uu")));
  it.K = it.Lambda_uu.ldlt().solve(it.Lambda_xu.transpose());
  it.residual = sol.residual;
  it.condition_number = sol.condition_number;
  it.rank = sol.rank;
  return it;
}

double max_state_norm(const std::vector<TrajectorySegment>& segs) {
  double out = 0.0;
  for (const auto& seg : segs) {
    for (const auto& s : seg.samples) out = std::max(out, s.x.norm());
  }
  return out;
}

// Records the iterate and applies the stopping and divergence tests.
// Returns true when the loop should stop.
template <class Iterate>
bool record(Trace<Iterate>& trace, Iterate it, double delta, double eps, DivergenceMonitor& mon) {
  trace.iterates.push_back(std::move(it));
  if (delta < eps) {
    trace.status = TerminationStatus::Converged;
    trace.converged_at = trace.iterates.back().iter;
    return true;
  }
  if (std::isfinite(delta) && mon.update(delta)) {
    trace.status = TerminationStatus::Diverged;
    trace.message = "iterate change grew three times in a row";
    return true;
  }
  return false;
}

}  // namespace

LqrTrace alg2_run(const LqrBank& bank, const Matrix& K0, const LearningConfig& cfg) {
  const RankDiagnostic rank = rank_check(bank);
  if (!rank.satisfied) {
    throw Error(ErrorCode::RankDeficient, "behavior data has rank " + std::to_string(rank.rank) +
                                              " < " + std::to_string(rank.required));
  }
  const Eigen::Index n = bank.n, m = bank.m;
  LqrTrace trace;
  DivergenceMonitor mon;
  Matrix K = K0;
  Matrix Lxu_prev = Matrix::Zero(n, m);
  for (int i = 0; i < cfg.max_iter; ++i) {
    const RegressionSystem sys = assemble_alg2(bank, K, Lxu_prev);
    SolutionIterate it = unpack(sys, solve_theta(sys, cfg.mode), n, m);
    it.iter = i;
    if (!trace.iterates.empty()) it.delta_P = spectral_norm(it.P - trace.last().P);
    K = it.K;
    Lxu_prev = it.Lambda_xu;
    const double delta = it.delta_P;
    if (record(trace, std::move(it), delta, cfg.eps, mon)) break;
  }
  return trace;
}

LqrTrace alg3_run(Plant& plant, const Matrix& K0, const LearningConfig& cfg) {
  const Eigen::Index n = plant.state_dim(), m = plant.input_dim();
  const SinusoidSum base(cfg.seed, 1.0, m);
  LqrTrace trace;
  DivergenceMonitor mon;
  Matrix K = K0;
  double amplitude = cfg.amplitude;
  for (int i = 0; i < cfg.max_iter; ++i) {
    const SinusoidSum w = base.scaled(amplitude);
    const ControlLaw target = [K](double, const Vector& x) { return Vector(-K * x); };
    const ControlLaw policy = [K, w](double t, const Vector& x) {
      return Vector(-K * x + w(t));
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
    trace.observe(segs);

    const RegressionSystem sys = assemble_alg3(segs);
    SolutionIterate it = unpack(sys, solve_theta(sys, cfg.mode), n, m);
    it.iter = i;
    it.max_state_norm = max_state_norm(segs);
    if (!trace.iterates.empty()) it.delta_P = spectral_norm(it.P - trace.last().P);

    // After the first episode the exploration level is fixed once, relative
    // to the magnitude of the improved policy on that episode's states.
    if (i == 0) {
      double peak_u = 0.0, peak_raw = 0.0;
      for (const auto& seg : segs) {
        for (const auto& s : seg.stages) {
          peak_u = std::max(peak_u, (it.K * s.x).cwiseAbs().maxCoeff());
          peak_raw = std::max(peak_raw, base(s.t).cwiseAbs().maxCoeff());
        }
      }
      if (peak_raw > 0.0 && peak_u > 0.0) amplitude = cfg.explore_fraction * peak_u / peak_raw;
    }

    K = it.K;
    const double delta = it.delta_P;
    if (record(trace, std::move(it), delta, cfg.eps, mon)) break;
  }
  return trace;
}

LqrTrace alg1_run(Plant& plant, const LqrBank& bank0, const Matrix& K0, const LearningConfig& cfg,
                  const OnPolicyOptions& opts) {
  const Eigen::Index n = bank0.n, m = bank0.m;
  const Eigen::Index np = sym_size(n), nm = n * m, mp = sym_size(m);
  const Eigen::Index rows0 = bank0.rows();
  if (rows0 < lqr_unknown_count(n, m)) {
    throw Error(ErrorCode::InsufficientRows, "alg1: behavior bank too small");
  }

  // Cumulative data from the start of the behavior record.
  Matrix Omega0(rows0, np + nm + mp);
  Vector Xi0(rows0);
  Matrix Psi0(rows0, np);
  Vector acc_row = Vector::Zero(np + nm + mp);
  Vector acc_psi = Vector::Zero(np);
  double acc_xi = 0.0;
  for (Eigen::Index k = 0; k < rows0; ++k) {
    acc_row.head(np) += bank0.phi.row(k).transpose();
    acc_row.segment(np, nm) += 2.0 * bank0.mu.row(k).transpose();
    acc_row.tail(mp) += bank0.nu.row(k).transpose();
    acc_psi += (bank0.phi.row(k) + bank0.psi.row(k)).transpose();
    acc_xi += bank0.xi[k];
    Omega0.row(k) = acc_row.transpose();
    Psi0.row(k) = acc_psi.transpose();
    Xi0[k] = acc_xi;
  }
  const Eigen::CompleteOrthogonalDecomposition<Matrix> omega_pinv(Omega0);
  if (omega_pinv.rank() < Omega0.cols()) {
    throw Error(ErrorCode::RankDeficient, "alg1: behavior bank lacks full rank");
  }

  std::mt19937_64 rng(opts.reset_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const SinusoidSum probe(cfg.seed, cfg.amplitude, m);

  LqrTrace trace;
  DivergenceMonitor mon;
  Matrix K = K0;
  for (int i = 0; i < cfg.max_iter; ++i) {
    const ControlLaw target = [K](double, const Vector& x) { return Vector(-K * x); };
    std::vector<TrajectorySegment> segs;
    try {
      if (opts.reset_allowed) {
        for (int k = 0; k < cfg.intervals; ++k) {
          Vector dir(n);
          for (Eigen::Index j = 0; j < n; ++j) dir[j] = normal(rng);
          plant.reset(std::pow(uniform(rng), 1.0 / static_cast<double>(n)) * dir / dir.norm());
          auto one = plant.run_episode(target, cfg.T / cfg.intervals, 1);
          segs.push_back(std::move(one.front()));
        }
      } else {
        const ControlLaw policy = [K, probe](double t, const Vector& x) {
          return Vector(-K * x + probe(t));
        };
        segs = plant.run_episode(policy, cfg.T, cfg.intervals, &target);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteState) throw;
      trace.status = TerminationStatus::Diverged;
      trace.message = e.what();
      break;
    }
    ++trace.episodes;
    trace.observe(segs);

    // Value step: vec_s(P)^T (x0 (x)_S x0 - x1 (x)_S x1) = int r.
    const auto rows = static_cast<Eigen::Index>(segs.size());
    Matrix psi1(rows, np);
    Vector rhs(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
      const TrajectorySegment& seg = segs[k];
      psi1.row(k) = sym_kron_vec(seg.x0()).data() - sym_kron_vec(seg.x1()).data();
      rhs[k] = integrate(seg, [](const Sample& s) { return Vector::Constant(1, s.r); })[0];
    }
    const RegressionSystem value(psi1, rhs, {{"P", 0, np}});
    if (value.rank() < np) {
      // Without resets the closed loop can lose excitation (or blow up along
      // one mode); either way the on-policy loop cannot continue.
      trace.status = TerminationStatus::Diverged;
      trace.message = "on-policy data has rank " + std::to_string(value.rank()) + " < " +
                      std::to_string(np);
      break;
    }
    const ThetaSolution vsol = solve_theta(value, SolveMode::Strict);

    SolutionIterate it;
    it.iter = i;
    it.P = unvec_s(vsol.theta);
    const Vector H = omega_pinv.solve(Vector(Xi0 + Psi0 * vsol.theta));
    it.Lambda_xu = unvec(H.segment(np, nm), n, m);
    it.Lambda_uu = unvec_s(Vector(H.tail(mp)));
    it.K = it.Lambda_uu.ldlt().solve(it.Lambda_xu.transpose());
    it.residual = vsol.residual;
    it.condition_number = vsol.condition_number;
    it.rank = vsol.rank;
    it.max_state_norm = max_state_norm(segs);
    if (!opts.reset_allowed) {
      const Matrix Huu = it.Lambda_uu;
      for (const auto& seg : segs) {
        it.bias += integrate(seg, [&](const Sample& s) {
                     return Vector::Constant(1, s.w.dot(Huu * s.w));
                   })[0];
      }
    }
    if (!trace.iterates.empty()) it.delta_P = spectral_norm(it.P - trace.last().P);
    K = it.K;
    const double delta = it.delta_P;
    if (!it.P.allFinite() || !K.allFinite()) {
      trace.iterates.push_back(std::move(it));
      trace.status = TerminationStatus::Diverged;
      trace.message = "non-finite iterate";
      break;
    }
    if (record(trace, std::move(it), delta, cfg.eps, mon)) break;
  }
  return trace;
}

}  // namespace ctql
