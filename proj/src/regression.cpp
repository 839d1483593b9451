#include "ctql/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ctql/error.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

namespace {

void require_rows(std::size_t have, Eigen::Index need, const char* what) {
  if (static_cast<Eigen::Index>(have) < need) {
    throw Error(ErrorCode::InsufficientRows, std::string(what) + ": have " +
                                                 std::to_string(have) + " rows, need " +
                                                 std::to_string(need));
  }
}

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

LqrBank collect_lqr_data(const std::vector<TrajectorySegment>& segments,
                         Eigen::Index required_rows) {
  require_rows(segments.size(), std::max<Eigen::Index>(required_rows, 1), "collect_lqr_data");
  const Eigen::Index n = segments.front().x0().size();
  const Eigen::Index m = segments.front().samples.front().u.size();
  const auto rows = static_cast<Eigen::Index>(segments.size());

  LqrBank bank;
  bank.n = n;
  bank.m = m;
  bank.psi.resize(rows, sym_size(n));
  bank.phi.resize(rows, sym_size(n));
  bank.delta.resize(rows, n * n);
  bank.mu.resize(rows, m * n);
  bank.nu.resize(rows, sym_size(m));
  bank.xi.resize(rows);
  bank.varrho.resize(rows);

  for (Eigen::Index k = 0; k < rows; ++k) {
    const TrajectorySegment& seg = segments[k];
    if (!seg.has_reward) {
      throw Error(ErrorCode::InsufficientRows, "collect_lqr_data: segment has no reward samples");
    }
    bank.psi.row(k) = sym_kron_vec(seg.x1()).data() - sym_kron_vec(seg.x0()).data();
    bank.phi.row(k) = integrate(seg, [](const Sample& s) { return sym_kron_vec(s.x).data(); });
    bank.delta.row(k) = integrate(seg, [](const Sample& s) { return kron(s.x, s.x); });
    bank.mu.row(k) = integrate(seg, [](const Sample& s) { return kron(s.u, s.x); });
    bank.nu.row(k) = integrate(seg, [](const Sample& s) { return sym_kron_vec(s.u).data(); });
    bank.xi[k] = integrate(seg, [](const Sample& s) { return scalar(s.r); })[0];
    bank.varrho[k] = seg.x1().squaredNorm() - seg.x0().squaredNorm();
  }
  return bank;
}

namespace {

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.size() == 0) return b;
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

Vector vstack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

void append_rows(LqrBank& bank, const LqrBank& more) {
  if (bank.rows() == 0) {
    bank = more;
    return;
  }
  if (bank.n != more.n || bank.m != more.m) {
    throw Error(ErrorCode::DimensionMismatch, "append_rows: banks differ in shape");
  }
  bank.psi = vstack(bank.psi, more.psi);
  bank.phi = vstack(bank.phi, more.phi);
  bank.delta = vstack(bank.delta, more.delta);
  bank.mu = vstack(bank.mu, more.mu);
  bank.nu = vstack(bank.nu, more.nu);
  bank.xi = vstack(bank.xi, more.xi);
  bank.varrho = vstack(bank.varrho, more.varrho);
}

void write_bank_csv(std::ostream& os, const LqrBank& bank) {
  auto header = [&](const char* name, Eigen::Index count) {
    for (Eigen::Index j = 0; j < count; ++j) os << ',' << name << '_' << j;
  };
  os << "interval";
  header("psi", bank.psi.cols());
  header("phi", bank.phi.cols());
  header("delta", bank.delta.cols());
  header("mu", bank.mu.cols());
  header("nu", bank.nu.cols());
  os << ",xi,varrho\n";
  const auto old_precision = os.precision(17);
  for (Eigen::Index k = 0; k < bank.rows(); ++k) {
    os << k;
    for (const Matrix* m : {&bank.psi, &bank.phi, &bank.delta, &bank.mu, &bank.nu}) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) os << ',' << (*m)(k, j);
    }
    os << ',' << bank.xi[k] << ',' << bank.varrho[k] << '\n';
  }
  os.precision(old_precision);
}

// ---------------------------------------------------------------------------

Eigen::Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * s[0];
  return (s.array() > tol).count();
}

RegressionSystem::RegressionSystem(Matrix delta, Vector xi, std::vector<UnknownBlock> layout)
    : delta_(std::move(delta)), xi_(std::move(xi)), layout_(std::move(layout)) {
  if (delta_.rows() != xi_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "RegressionSystem: rows of delta and xi differ");
  }
  refresh();
}

const UnknownBlock& RegressionSystem::block(const std::string& name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw Error(ErrorCode::DimensionMismatch, "no unknown block named " + name);
}

void RegressionSystem::set_delta(Matrix delta) {
  if (delta.rows() != xi_.size() || delta.cols() != delta_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "set_delta: shape changed");
  }
  delta_ = std::move(delta);
  refresh();
}

void RegressionSystem::refresh() {
  Eigen::JacobiSVD<Matrix> svd(delta_);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) {
    rank_ = 0;
    cond_ = std::numeric_limits<double>::infinity();
    return;
  }
  const double tol = static_cast<double>(std::max(delta_.rows(), delta_.cols())) *
                     std::numeric_limits<double>::epsilon() * s[0];
  rank_ = (s.array() > tol).count();
  cond_ = s[0] / s[rank_ - 1];
}

// ---------------------------------------------------------------------------

RegressionSystem assemble_alg2(const LqrBank& bank, const Matrix& K,
                               const Matrix& Lambda_xu_prev) {
  const Eigen::Index n = bank.n, m = bank.m;
  if (K.rows() != m || K.cols() != n || Lambda_xu_prev.rows() != n ||
      Lambda_xu_prev.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "assemble_alg2: K must be m x n, Lambda_xu n x m");
  }
  const Eigen::Index rows = bank.rows();
  const Eigen::Index np = sym_size(n), nm = n * m, mp = sym_size(m);
  Matrix delta(rows, np + nm + mp);
  Vector rhs(rows);
  const Vector coupling = vec(K.transpose() * Lambda_xu_prev.transpose());
  for (Eigen::Index k = 0; k < rows; ++k) {
    const Matrix D = unvec(bank.delta.row(k).transpose(), n, n);
    delta.block(k, 0, 1, np) = -bank.psi.row(k);
    delta.block(k, np, 1, nm) = 2.0 * (bank.mu.row(k) + vec(D * K.transpose()).transpose());
    delta.block(k, np + nm, 1, mp) = bank.nu.row(k);
    rhs[k] = bank.xi[k] + bank.delta.row(k).dot(coupling);
  }
  return RegressionSystem(std::move(delta), std::move(rhs),
                          {{"P", 0, np}, {"Lambda_xu", np, nm}, {"Lambda_uu", np + nm, mp}});
}

namespace {

void require_noise(const TrajectorySegment& seg) {
  if (!seg.has_noise) {
    throw Error(ErrorCode::MissingNoiseRecord, "segment was recorded without w = u - u_i");
  }
}

void require_reward(const TrajectorySegment& seg) {
  if (!seg.has_reward) {
    throw Error(ErrorCode::InsufficientRows, "segment has no reward samples");
  }
}

}  // namespace

RegressionSystem assemble_alg3(const std::vector<TrajectorySegment>& segments) {
  require_rows(segments.size(), 1, "assemble_alg3");
  const Eigen::Index n = segments.front().x0().size();
  const Eigen::Index m = segments.front().samples.front().u.size();
  const Eigen::Index np = sym_size(n), nm = n * m, mp = sym_size(m);
  const auto rows = static_cast<Eigen::Index>(segments.size());
  Matrix delta(rows, np + nm + mp);
  Vector rhs(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const TrajectorySegment& seg = segments[k];
    require_noise(seg);
    require_reward(seg);
    delta.block(k, 0, 1, np) =
        -(sym_kron_vec(seg.x1()).data() - sym_kron_vec(seg.x0()).data()).transpose();
    delta.block(k, np, 1, nm) =
        2.0 * integrate(seg, [](const Sample& s) { return kron(s.w, s.x); }).transpose();
    delta.block(k, np + nm, 1, mp) = integrate(seg, [](const Sample& s) {
                                       const Vector ui = s.u - s.w;
                                       return Vector(sym_kron(s.w, s.w) + 2.0 * sym_kron(ui, s.w));
                                     }).transpose();
    rhs[k] = integrate(seg, [](const Sample& s) { return scalar(s.r); })[0];
  }
  return RegressionSystem(std::move(delta), std::move(rhs),
                          {{"P", 0, np}, {"Lambda_xu", np, nm}, {"Lambda_uu", np + nm, mp}});
}

RankDiagnostic rank_check(const LqrBank& bank) {
  RankDiagnostic d;
  d.required = lqr_unknown_count(bank.n, bank.m);
  if (bank.rows() == 0) return d;
  Matrix uu(bank.rows(), bank.m * bank.m);
  for (Eigen::Index k = 0; k < bank.rows(); ++k) {
    // Expand int u (x)_S u (raw products) back to int u (x) u.
    for (Eigen::Index i = 0; i < bank.m; ++i) {
      for (Eigen::Index j = 0; j < bank.m; ++j) {
        uu(k, j * bank.m + i) = bank.nu(k, sym_index(bank.m, std::min(i, j), std::max(i, j)));
      }
    }
  }
  Matrix stacked(bank.rows(), bank.delta.cols() + bank.mu.cols() + uu.cols());
  stacked << bank.delta, bank.mu, uu;
  d.rank = numerical_rank(stacked);
  d.satisfied = d.rank >= d.required;
  return d;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<UnknownBlock> constrained_layout(const BasisSpec& basis, Eigen::Index m) {
  const Eigen::Index p = basis.size, q = basis.grad_vec_size();
  return {{"W", 0, p}, {"Lambda_xu", p, m * q}, {"Lambda_uu", p + m * q, m}};
}

Vector discounted_basis_difference(const TrajectorySegment& seg, const ConstrainedSetup& setup) {
  return std::exp(-setup.gamma * (seg.t1 - seg.t0)) * setup.basis.features(seg.x1()) -
         setup.basis.features(seg.x0());
}

}  // namespace

RegressionSystem assemble_alg4(const std::vector<TrajectorySegment>& segments,
                               const ControlLaw& target, const ConstrainedSetup& setup,
                               const Vector& Lambda_uu_prev) {
  require_rows(segments.size(), 1, "assemble_alg4");
  const Eigen::Index m = segments.front().samples.front().u.size();
  if (Lambda_uu_prev.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "assemble_alg4: Lambda_uu_prev must have m entries");
  }
  const BasisSpec& basis = setup.basis;
  const double lambda = setup.lambda, gamma = setup.gamma;
  const Eigen::Index p = basis.size, mq = m * basis.grad_vec_size();
  const auto rows = static_cast<Eigen::Index>(segments.size());
  Matrix delta(rows, p + mq + m);
  Vector rhs(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const TrajectorySegment& seg = segments[k];
    require_reward(seg);
    // Per stage: [u (x) z - u_i (x) z, nu(u), r + Lambda_uu_prev . nu(u_i)]
    const Vector row = integrate(
        seg,
        [&](const Sample& s) {
          const Vector z = basis.grad_vec(s.x);
          const Vector ui = target(s.t, s.x);
          Vector v(mq + m + 1);
          v.head(mq) = kron(Vector(s.u - ui), z);
          v.segment(mq, m) = barrier_features(s.u, lambda);
          v[mq + m] = s.r + Lambda_uu_prev.dot(barrier_features(ui, lambda));
          return v;
        },
        gamma);
    delta.block(k, 0, 1, p) = -discounted_basis_difference(seg, setup).transpose();
    delta.block(k, p, 1, mq + m) = row.head(mq + m).transpose();
    rhs[k] = row[mq + m];
  }
  return RegressionSystem(std::move(delta), std::move(rhs), constrained_layout(basis, m));
}

RegressionSystem assemble_alg5(const std::vector<TrajectorySegment>& segments,
                               const ConstrainedSetup& setup) {
  require_rows(segments.size(), 1, "assemble_alg5");
  const Eigen::Index m = segments.front().samples.front().u.size();
  const BasisSpec& basis = setup.basis;
  const double lambda = setup.lambda, gamma = setup.gamma;
  const Eigen::Index p = basis.size, mq = m * basis.grad_vec_size();
  const auto rows = static_cast<Eigen::Index>(segments.size());
  Matrix delta(rows, p + mq + m);
  Vector rhs(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const TrajectorySegment& seg = segments[k];
    require_noise(seg);
    require_reward(seg);
    const Vector row = integrate(
        seg,
        [&](const Sample& s) {
          const Vector ui = s.u - s.w;
          Vector v(mq + m + 1);
          v.head(mq) = kron(s.w, basis.grad_vec(s.x));
          v.segment(mq, m) = barrier_features(s.u, lambda) - barrier_features(ui, lambda);
          v[mq + m] = s.r;
          return v;
        },
        gamma);
    delta.block(k, 0, 1, p) = -discounted_basis_difference(seg, setup).transpose();
    delta.block(k, p, 1, mq + m) = row.head(mq + m).transpose();
    rhs[k] = row[mq + m];
  }
  return RegressionSystem(std::move(delta), std::move(rhs), constrained_layout(basis, m));
}

// ---------------------------------------------------------------------------

Vector ThetaSolution::block(const RegressionSystem& sys, const std::string& name) const {
  const UnknownBlock& b = sys.block(name);
  return theta.segment(b.offset, b.size);
}

ThetaSolution solve_theta(const RegressionSystem& sys, SolveMode mode, double rcond) {
  const Matrix& delta = sys.delta();
  ThetaSolution sol;
  sol.rank = sys.rank();
  sol.condition_number = sys.condition_number();
  if (mode == SolveMode::Strict) {
    if (sys.rank() < sys.unknowns()) {
      throw Error(ErrorCode::RankDeficient,
                  "rank " + std::to_string(sys.rank()) + " < " + std::to_string(sys.unknowns()) +
                      " unknowns");
    }
    sol.theta = delta.colPivHouseholderQr().solve(sys.xi());
  } else {
    // Equilibrate columns, then take the minimum-norm solution. Singular
    // values below max(numerical-rank threshold, rcond * sigma_max) are cut.
    Vector scale = delta.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (scale[j] == 0.0) scale[j] = 1.0;
    }
    const Matrix scaled = delta * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Matrix> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double tol = static_cast<double>(std::max(scaled.rows(), scaled.cols())) *
                       std::numeric_limits<double>::epsilon() * (s.size() ? s[0] : 0.0);
    const double cut = std::max(tol, rcond * (s.size() ? s[0] : 0.0));
    Vector inv = Vector::Zero(s.size());
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > cut) {
        inv[i] = 1.0 / s[i];
        ++r;
      }
    }
    const Vector y = svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * sys.xi()));
    sol.theta = scale.cwiseInverse().asDiagonal() * y;
    sol.rank = r;
    sol.condition_number = r > 0 ? s[0] / s[r - 1] : std::numeric_limits<double>::infinity();
  }
  const double norm_xi = sys.xi().norm();
  const double res = (delta * sol.theta - sys.xi()).norm();
  sol.residual = norm_xi > 0.0 ? res / norm_xi : res;
  return sol;
}

}  // namespace ctql
