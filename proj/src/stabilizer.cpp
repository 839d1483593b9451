#include "ctql/stabilizer.hpp"

#include <cmath>
#include <random>

#include "ctql/error.hpp"
#include "ctql/sdp.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

namespace {

constexpr double kVarpiMin = 1e-6;
constexpr double kVarpiMax = 1e6;
constexpr double kFeasibleMargin = 1e-7;

Matrix sym_unit(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  Matrix e = Matrix::Zero(n, n);
  e(i, j) = 1.0;
  e(j, i) = 1.0;
  return e;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

PiBEstimate estimate_pi_b(const LqrBank& bank) {
  const Eigen::Index n = bank.n, m = bank.m;
  Matrix delta(bank.rows(), bank.phi.cols() + bank.mu.cols());
  delta << bank.phi, 2.0 * bank.mu;
  const auto qr = delta.colPivHouseholderQr();
  if (qr.rank() < delta.cols()) {
    throw Error(ErrorCode::RankDeficient, "estimate_pi_b: [phi, 2 mu] has rank " +
                                              std::to_string(qr.rank()) + " < " +
                                              std::to_string(delta.cols()));
  }
  const Vector theta = qr.solve(bank.varrho);
  PiBEstimate est;
  est.Pi = unvec_s(Vector(theta.head(sym_size(n))));
  est.B = unvec(theta.tail(n * m), n, m);
  const double scale = bank.varrho.norm();
  const double res = (delta * theta - bank.varrho).norm();
  est.residual = scale > 0.0 ? res / scale : res;
  return est;
}

Matrix lmi_gain(const Matrix& S, double varpi, const Matrix& B) {
  return 0.5 * varpi * B.transpose() * S.inverse();
}

LmiResult solve_stabilizing_lmi(const LmiData& data) {
  const Eigen::Index n = data.Pi.rows();
  if (data.Pi.cols() != n || data.B.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "LMI data: Pi must be n x n and B n x m");
  }
  const Eigen::Index ns = sym_size(n);
  const Matrix BBt = data.B * data.B.transpose();
  const Matrix I = Matrix::Identity(n, n);

  std::vector<Matrix> units;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) units.push_back(sym_unit(n, i, j));
  }
  // Decision vector y = [S coordinates; varpi].
  LmiConstraint decay{Matrix::Zero(n, n), {}, true};
  LmiConstraint pos{Matrix::Zero(n, n), {}, true};
  LmiConstraint upper{I, {}, false};
  for (const Matrix& e : units) {
    decay.Fi.push_back(-symmetrize(e * data.Pi + data.Pi * e - data.gamma_xx(e)));
    pos.Fi.push_back(e);
    upper.Fi.push_back(-e);
  }
  decay.Fi.push_back(BBt);
  pos.Fi.push_back(Matrix::Zero(n, n));
  upper.Fi.push_back(Matrix::Zero(n, n));

  auto scalar_bound = [&](double c0, double cv) {
    LmiConstraint c{Matrix::Constant(1, 1, c0), {}, false};
    for (Eigen::Index k = 0; k < ns; ++k) c.Fi.push_back(Matrix::Zero(1, 1));
    c.Fi.push_back(Matrix::Constant(1, 1, cv));
    return c;
  };

  Vector y0 = Vector::Zero(ns + 1);
  for (Eigen::Index i = 0; i < n; ++i) y0[sym_index(n, i, i)] = 0.5;  // S = I / 2
  y0[ns] = kVarpiMin * 10.0;

  LmiResult best;
  best.margin = -std::numeric_limits<double>::infinity();
  for (double cap = 1.0; cap <= kVarpiMax * 1.0000001; cap *= 10.0) {
    std::vector<LmiConstraint> cs = {decay, pos, upper, scalar_bound(-kVarpiMin, 1.0),
                                     scalar_bound(cap, -1.0)};
    const SdpResult r = maximize_margin(cs, y0);
    if (r.margin > best.margin) {
      best.margin = r.margin;
      Matrix S = Matrix::Zero(n, n);
      for (Eigen::Index k = 0; k < ns; ++k) S += r.y[k] * units[k];
      best.S = S;
      best.varpi = r.y[ns];
    }
    if (best.margin >= kFeasibleMargin) break;
  }
  if (!(best.margin >= kFeasibleMargin)) {
    throw Error(ErrorCode::Infeasible,
                "stabilizing LMI has margin " + std::to_string(best.margin) + " < 1e-7");
  }
  best.K = lmi_gain(best.S, best.varpi, data.B);
  return best;
}

LmiResult lmi_stabilizing_gain(const LqrBank& bank) {
  const PiBEstimate est = estimate_pi_b(bank);
  const Eigen::Index n = bank.n;
  Matrix delta(bank.rows(), bank.phi.cols() + bank.mu.cols());
  delta << bank.phi, 2.0 * bank.mu;
  const auto qr = delta.colPivHouseholderQr();
  LmiData data;
  data.Pi = est.Pi;
  data.B = est.B;
  data.gamma_xx = [qr, psi = bank.psi, n](const Matrix& S) {
    const Vector theta = qr.solve(Vector(psi * vec_s(symmetrize(S)).data()));
    return unvec_s(Vector(theta.head(sym_size(n))));
  };
  return solve_stabilizing_lmi(data);
}

LmiResult model_lmi_gain(const Matrix& A, const Matrix& B) {
  LmiData data;
  data.Pi = A + A.transpose();
  data.B = B;
  data.gamma_xx = [A](const Matrix& S) { return Matrix(A.transpose() * S + S * A); };
  try {
    return solve_stabilizing_lmi(data);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Infeasible) {
      throw Error(ErrorCode::NotStabilizable, std::string("model LMI: ") + e.what());
    }
    throw;
  }
}

// ---------------------------------------------------------------------------

std::vector<TrajectorySegment> collect_reset_segments(Plant& plant, int count, double T,
                                                      int intervals, std::uint64_t seed,
                                                      const ControlLaw* policy) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index n = plant.state_dim();
  const Eigen::Index m = plant.input_dim();
  const ControlLaw zero = [m](double, const Vector&) { return Vector(Vector::Zero(m)); };
  std::vector<TrajectorySegment> out;
  for (int k = 0; k < count; ++k) {
    Vector dir(n);
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = normal(rng);
    const double radius = std::pow(uniform(rng), 1.0 / static_cast<double>(n));
    plant.reset(radius * dir / dir.norm());
    auto segs = plant.run_episode(policy != nullptr ? *policy : zero, T, intervals);
    out.insert(out.end(), std::make_move_iterator(segs.begin()),
               std::make_move_iterator(segs.end()));
  }
  return out;
}

Matrix estimate_M(const std::vector<TrajectorySegment>& resets, const Matrix& C) {
  const Eigen::Index p = C.rows();
  const Eigen::Index cols = sym_size(p);
  const auto rows = static_cast<Eigen::Index>(resets.size());
  if (rows < cols) {
    throw Error(ErrorCode::RankDeficient, "estimate_M: " + std::to_string(rows) +
                                              " rows for " + std::to_string(cols) + " unknowns");
  }
  Matrix varsigma(rows, cols);
  Vector vartheta(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const TrajectorySegment& seg = resets[k];
    if (!seg.has_reward) throw Error(ErrorCode::InsufficientRows, "estimate_M: no reward");
    varsigma.row(k) = integrate(seg, [&](const Sample& s) {
                        return sym_kron_vec(Vector(C * s.x)).data();
                      }).transpose();
    vartheta[k] = integrate(seg, [](const Sample& s) { return Vector::Constant(1, s.r); })[0];
  }
  const auto qr = varsigma.colPivHouseholderQr();
  if (qr.rank() < cols) {
    throw Error(ErrorCode::RankDeficient, "estimate_M: reset data has rank " +
                                              std::to_string(qr.rank()) + " < " +
                                              std::to_string(cols));
  }
  const Matrix M = unvec_s(Vector(qr.solve(vartheta)));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(M));
  Vector ev = eig.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 1e-8) ev[i] = std::max(ev[i], 0.0);
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

GramianResult gramian_admissible_gain(const std::vector<TrajectorySegment>& resets, double gamma,
                                      const Matrix& M_hat, const Matrix& C, const Matrix& B_hat,
                                      const AdmissibilityCheck* check) {
  const Eigen::Index N = C.cols();
  const Eigen::Index cols = sym_size(N);
  const auto rows = static_cast<Eigen::Index>(resets.size());
  if (rows < cols) {
    throw Error(ErrorCode::RankDeficient, "gramian: " + std::to_string(rows) + " rows for " +
                                              std::to_string(cols) + " unknowns");
  }
  Matrix chi(rows, cols);
  Matrix rho(rows, cols);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const TrajectorySegment& seg = resets[k];
    rho.row(k) = integrate(seg, [](const Sample& s) { return sym_kron_vec(s.x).data(); });
    chi.row(k) = (sym_kron_vec(seg.x1()).data() - sym_kron_vec(seg.x0()).data()).transpose() -
                 gamma * rho.row(k);
  }
  const Vector rhs = -rho * vec_s(symmetrize(C.transpose() * M_hat * C)).data();
  const auto qr = chi.colPivHouseholderQr();
  if (qr.rank() < cols) {
    throw Error(ErrorCode::RankDeficient, "gramian: chi has rank " + std::to_string(qr.rank()) +
                                              " < " + std::to_string(cols));
  }
  const Vector s = qr.solve(rhs);
  GramianResult out;
  out.S = unvec_s(s);
  out.K_hyp = B_hat.transpose() * out.S;
  const double scale = rhs.norm();
  out.residual = scale > 0.0 ? (chi * s - rhs).norm() / scale : (chi * s - rhs).norm();
  if (check != nullptr && !(*check)(out.K_hyp)) {
    throw Error(ErrorCode::NotAdmissible, "gramian gain leaves the saturated loop unbounded");
  }
  return out;
}

AdmissibilityCheck bounded_closed_loop_check(LtiSystem sys, Vector X0, double lambda,
                                             double horizon, double dt) {
  sys.validate();
  return [sys = std::move(sys), X0 = std::move(X0), lambda, horizon, dt](const Matrix& K) {
    const double bound = 10.0 * std::max(X0.norm(), 1e-12);
    auto f = [&](const Vector& x) -> Vector {
      Vector v = K * x;
      if (std::isfinite(lambda)) v = (v.array() / lambda).tanh() * lambda;
      return sys.A * x - sys.B * v;
    };
    Vector x = X0;
    const auto steps = static_cast<long>(std::ceil(horizon / dt));
    for (long s = 0; s < steps; ++s) {
      const Vector k1 = f(x);
      const Vector k2 = f(x + 0.5 * dt * k1);
      const Vector k3 = f(x + 0.5 * dt * k2);
      const Vector k4 = f(x + dt * k3);
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite() || x.norm() > bound) return false;
    }
    return true;
  };
}

SearchResult admissible_search(const Matrix& K_hyp, const std::vector<double>& grid,
                               const AdmissibilityCheck& check) {
  for (double c : grid) {
    const Matrix K = c * K_hyp;
    if (check(K)) return {K, c};
  }
  throw Error(ErrorCode::SearchExhausted, "no scale in the grid gives a bounded closed loop");
}

}  // namespace ctql
