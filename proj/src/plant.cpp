#include "ctql/plant.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ctql/error.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

void LtiSystem::validate() const {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "LtiSystem: A must be n x n and B n x m");
  }
}

AugmentedSystem augment(const Matrix& A, const Matrix& B, const Matrix& A_r) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || A_r.rows() != n || A_r.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "augment: A, B, A_r shapes disagree");
  }
  AugmentedSystem aug;
  aug.A_r = A_r;
  aug.F = Matrix::Zero(2 * n, 2 * n);
  aug.F.topLeftCorner(n, n) = A;
  aug.F.topRightCorner(n, n) = A - A_r;
  aug.F.bottomRightCorner(n, n) = A_r;
  aug.G = Matrix::Zero(2 * n, B.cols());
  aug.G.topRows(n) = B;
  return aug;
}

CostOracle CostOracle::quadratic(Matrix Q, Matrix R) {
  CostOracle o;
  o.Q_ = std::move(Q);
  o.R_ = std::move(R);
  return o;
}

CostOracle CostOracle::constrained(Matrix Q, Vector r_diag, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::SaturationDomain, "lambda must be positive");
  CostOracle o;
  o.Q_ = std::move(Q);
  o.R_ = r_diag.asDiagonal();
  o.lambda_ = lambda;
  return o;
}

double CostOracle::reward(const Vector& x, const Vector& u) const {
  const double state_cost = x.dot(Q_ * x);
  if (!is_constrained()) return state_cost + u.dot(R_ * u);
  return state_cost + constrained_cost_U(u, R_.diagonal(), lambda_);
}

namespace {

void check_domain(const Vector& u, double lambda) {
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    if (!(std::abs(u[j]) < lambda)) {
      throw Error(ErrorCode::SaturationDomain,
                  "|u_" + std::to_string(j) + "| = " + std::to_string(std::abs(u[j])) +
                      " is not below lambda = " + std::to_string(lambda));
    }
  }
}

double guarded_ratio(double u, double lambda) {
  return std::clamp(u / lambda, -kSaturationGuard, kSaturationGuard);
}

}  // namespace

Vector barrier_features(const Vector& u, double lambda) {
  check_domain(u, lambda);
  Vector out(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double s = guarded_ratio(u[j], lambda);
    out[j] = 2.0 * lambda * u[j] * std::atanh(s) + lambda * lambda * std::log1p(-s * s);
  }
  return out;
}

double constrained_cost_U(const Vector& u, const Vector& r_diag, double lambda) {
  if (r_diag.size() != u.size()) {
    throw Error(ErrorCode::DimensionMismatch, "constrained_cost_U: R and u sizes differ");
  }
  return r_diag.dot(barrier_features(u, lambda));
}

Vector constrained_cost_gradient(const Vector& u, const Vector& r_diag, double lambda) {
  check_domain(u, lambda);
  Vector g(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    g[j] = 2.0 * lambda * r_diag[j] * std::atanh(guarded_ratio(u[j], lambda));
  }
  return g;
}

double saturation_inner_integral(const Vector& u, const Vector& weights, double lambda) {
  return 0.5 * weights.dot(barrier_features(u, lambda));
}

Vector soft_saturate(const Vector& v, double lambda) {
  if (!std::isfinite(lambda)) return v;
  Vector out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    out[j] = lambda * std::clamp(std::tanh(v[j] / lambda), -kSaturationGuard, kSaturationGuard);
  }
  return out;
}

SinusoidSum::SinusoidSum(std::uint64_t seed, double amplitude, Eigen::Index channels, int terms,
                         double max_frequency)
    : amplitude_(amplitude), omegas_(channels, terms) {
  if (!(amplitude > 0.0)) {
    throw Error(ErrorCode::Config, "behavior amplitude must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-max_frequency, max_frequency);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int i = 0; i < terms; ++i) omegas_(c, i) = dist(rng);
  }
}

Vector SinusoidSum::operator()(double t) const {
  Vector u(omegas_.rows());
  for (Eigen::Index c = 0; c < omegas_.rows(); ++c) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < omegas_.cols(); ++i) s += std::sin(omegas_(c, i) * t);
    u[c] = amplitude_ * s;
  }
  return u;
}

SinusoidSum SinusoidSum::scaled(double amplitude) const {
  SinusoidSum copy = *this;
  copy.amplitude_ = amplitude;
  return copy;
}

ControlLaw behavior_policy(std::uint64_t seed, double amplitude, Eigen::Index channels,
                           double lambda) {
  SinusoidSum signal(seed, amplitude, channels);
  return [signal, lambda](double t, const Vector&) { return soft_saturate(signal(t), lambda); };
}

Vector BasisSpec::grad_vec(const Vector& x) const {
  const Matrix jt = jacobian(x).transpose();  // state_dim x size
  return vec(jt);
}

BasisSpec quadratic_basis(Eigen::Index state_dim) {
  BasisSpec b;
  b.state_dim = state_dim;
  b.size = sym_size(state_dim);
  b.features = [](const Vector& x) { return sym_kron_vec(x).data(); };
  b.jacobian = [state_dim](const Vector& x) {
    Matrix jac = Matrix::Zero(sym_size(state_dim), state_dim);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < state_dim; ++i) {
      for (Eigen::Index j = i; j < state_dim; ++j, ++k) {
        jac(k, i) += x[j];
        jac(k, j) += x[i];
      }
    }
    return jac;
  };
  return b;
}

namespace {

// grad_vec(X) = L X for a basis whose gradient is linear in the state.
Matrix gradient_map(const BasisSpec& basis) {
  Matrix L(basis.grad_vec_size(), basis.state_dim);
  for (Eigen::Index c = 0; c < basis.state_dim; ++c) {
    L.col(c) = basis.grad_vec(Vector::Unit(basis.state_dim, c));
  }
  return L;
}

}  // namespace

Matrix effective_linear_gain(const Matrix& K, const BasisSpec& basis) {
  return K * gradient_map(basis);
}

Matrix basis_gain_from_linear(const Matrix& K_lin, const BasisSpec& basis) {
  const Matrix L = gradient_map(basis);
  // Minimum-norm K with K L = K_lin.
  return L.transpose().completeOrthogonalDecomposition().solve(K_lin.transpose()).transpose();
}

ControlLaw saturated_policy(Matrix K, double lambda, BasisSpec basis) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::SaturationDomain, "lambda must be positive");
  return [K = std::move(K), lambda, basis = std::move(basis)](double, const Vector& x) {
    return Vector(-soft_saturate(K * basis.grad_vec(x), lambda));
  };
}

ControlLaw linear_policy(Matrix K) {
  return [K = std::move(K)](double, const Vector& x) { return Vector(-K * x); };
}

namespace {

Sample make_sample(double t, const Vector& x, const ControlLaw& policy, const CostOracle* oracle,
                   const ControlLaw* target) {
  Sample s;
  s.t = t;
  s.x = x;
  s.u = policy(t, x);
  if (target != nullptr) s.w = s.u - (*target)(t, x);
  if (oracle != nullptr) s.r = oracle->reward(x, s.u);
  return s;
}

bool finite(const Vector& v) { return v.allFinite(); }

}  // namespace

TrajectorySegment simulate_segment(const LtiSystem& sys, const ControlLaw& policy,
                                   const Vector& x0, double t0, double t1, double dt,
                                   const CostOracle* oracle, const ControlLaw* target) {
  sys.validate();
  if (x0.size() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "simulate_segment: x0 has wrong dimension");
  }
  if (!(dt > 0.0) || !(t1 > t0)) {
    throw Error(ErrorCode::Config, "simulate_segment: need dt > 0 and t1 > t0");
  }
  const auto steps = static_cast<Eigen::Index>(std::llround((t1 - t0) / dt));
  if (steps < 10) {
    throw Error(ErrorCode::Config, "simulate_segment: fewer than 10 steps per segment");
  }

  TrajectorySegment seg;
  seg.t0 = t0;
  seg.t1 = t1;
  seg.h = (t1 - t0) / static_cast<double>(steps);
  seg.has_noise = target != nullptr;
  seg.has_reward = oracle != nullptr;
  seg.samples.reserve(steps + 1);
  seg.stages.reserve(4 * steps);

  const double h = seg.h;
  auto rhs = [&](const Sample& s) -> Vector { return sys.A * s.x + sys.B * s.u; };

  Vector x = x0;
  seg.samples.push_back(make_sample(t0, x, policy, oracle, target));
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    const Sample s1 = seg.samples.back();
    const Vector k1 = rhs(s1);
    const Sample s2 = make_sample(t + 0.5 * h, x + 0.5 * h * k1, policy, oracle, target);
    const Vector k2 = rhs(s2);
    const Sample s3 = make_sample(t + 0.5 * h, x + 0.5 * h * k2, policy, oracle, target);
    const Vector k3 = rhs(s3);
    const Sample s4 = make_sample(t + h, x + h * k3, policy, oracle, target);
    const Vector k4 = rhs(s4);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!finite(x)) {
      throw Error(ErrorCode::NonFiniteState,
                  "state became non-finite at t = " + std::to_string(t + h));
    }
    seg.stages.push_back(s1);
    seg.stages.push_back(s2);
    seg.stages.push_back(s3);
    seg.stages.push_back(s4);
    const double t_next = (k + 1 == steps) ? t1 : t0 + static_cast<double>(k + 1) * h;
    seg.samples.push_back(make_sample(t_next, x, policy, oracle, target));
  }
  return seg;
}

Plant::Plant(LtiSystem sys, CostOracle oracle, Vector x0, double dt, double t0)
    : sys_(std::move(sys)), oracle_(std::move(oracle)), x_(std::move(x0)), t_(t0), dt_(dt) {
  sys_.validate();
  if (x_.size() != sys_.n()) {
    throw Error(ErrorCode::DimensionMismatch, "Plant: x0 has wrong dimension");
  }
}

std::vector<TrajectorySegment> Plant::run_episode(const ControlLaw& policy, double T,
                                                  int intervals, const ControlLaw* target) {
  if (intervals < 1) throw Error(ErrorCode::Config, "run_episode: intervals must be >= 1");
  std::vector<TrajectorySegment> out;
  out.reserve(intervals);
  const double t_start = t_;
  for (int k = 0; k < intervals; ++k) {
    const double a = t_start + T * k / intervals;
    const double b = t_start + T * (k + 1) / intervals;
    out.push_back(simulate_segment(sys_, policy, x_, a, b, dt_, &oracle_, target));
    for (const Sample& s : out.back().stages) {
      max_abs_u_ = std::max(max_abs_u_, s.u.cwiseAbs().maxCoeff());
    }
    x_ = out.back().x1();
  }
  t_ = t_start + T;
  return out;
}

void Plant::reset(const Vector& x0) {
  if (x0.size() != sys_.n()) {
    throw Error(ErrorCode::DimensionMismatch, "Plant::reset: wrong dimension");
  }
  x_ = x0;
}

}  // namespace ctql
