#include "ctql/sdp.hpp"

#include <cmath>
#include <limits>

#include "ctql/error.hpp"

namespace ctql {

namespace {

struct Evaluation {
  bool feasible = false;
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

Matrix affine(const LmiConstraint& c, const Vector& v) {
  const Eigen::Index d = static_cast<Eigen::Index>(c.Fi.size());
  Matrix f = c.F0;
  for (Eigen::Index i = 0; i < d; ++i) f += v[i] * c.Fi[i];
  if (c.margin) f -= v[d] * Matrix::Identity(f.rows(), f.cols());
  return f;
}

// Barrier objective -tau t - sum log det F_k(v); derivatives only on request.
Evaluation evaluate(const std::vector<LmiConstraint>& cs, const Vector& v, double tau,
                    bool derivatives) {
  const Eigen::Index dim = v.size();
  const Eigen::Index d = dim - 1;
  Evaluation e;
  e.value = -tau * v[d];
  if (derivatives) {
    e.grad = Vector::Zero(dim);
    e.grad[d] = -tau;
    e.hess = Matrix::Zero(dim, dim);
  }
  for (const LmiConstraint& c : cs) {
    const Matrix f = affine(c, v);
    Eigen::LLT<Matrix> llt(f);
    if (llt.info() != Eigen::Success) return e;
    const Matrix& L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      if (!(L(i, i) > 0.0)) return e;
      logdet += 2.0 * std::log(L(i, i));
    }
    e.value -= logdet;
    if (!derivatives) continue;
    const Matrix finv = llt.solve(Matrix::Identity(f.rows(), f.cols()));
    std::vector<Matrix> dirs(dim);
    for (Eigen::Index i = 0; i < d; ++i) dirs[i] = finv * c.Fi[i];
    dirs[d] = c.margin ? Matrix(-finv) : Matrix::Zero(f.rows(), f.cols());
    for (Eigen::Index i = 0; i < dim; ++i) {
      e.grad[i] -= dirs[i].trace();
      for (Eigen::Index j = i; j < dim; ++j) {
        const double h = (dirs[i].transpose().cwiseProduct(dirs[j])).sum();
        e.hess(i, j) += h;
        if (j != i) e.hess(j, i) += h;
      }
    }
  }
  e.feasible = std::isfinite(e.value);
  return e;
}

}  // namespace

SdpResult maximize_margin(const std::vector<LmiConstraint>& constraints, const Vector& y0,
                          double gap_tol, double margin_cap) {
  if (constraints.empty()) throw Error(ErrorCode::DimensionMismatch, "no constraints");
  const Eigen::Index d = y0.size();
  Eigen::Index barrier_dim = 0;
  bool any_margin = false;
  for (const LmiConstraint& c : constraints) {
    if (static_cast<Eigen::Index>(c.Fi.size()) != d || c.F0.rows() != c.F0.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "constraint shape does not match y0");
    }
    barrier_dim += c.F0.rows();
    any_margin = any_margin || c.margin;
  }
  if (!any_margin) throw Error(ErrorCode::DimensionMismatch, "no constraint carries the margin");

  // Start below the smallest eigenvalue of every margin block.
  Vector v(d + 1);
  v.head(d) = y0;
  v[d] = 0.0;
  double t0 = std::numeric_limits<double>::infinity();
  for (const LmiConstraint& c : constraints) {
    const Matrix f = affine(c, v);
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(f, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
    if (c.margin) {
      t0 = std::min(t0, lmin);
    } else if (!(lmin > 0.0)) {
      throw Error(ErrorCode::Infeasible, "starting point violates a margin-free constraint");
    }
  }
  v[d] = t0 - 1.0;

  SdpResult out;
  double tau = 1.0;
  for (int outer = 0; outer < 60; ++outer) {
    for (int inner = 0; inner < 200; ++inner) {
      const Evaluation e = evaluate(constraints, v, tau, true);
      Matrix H = e.hess;
      H.diagonal().array() += 1e-14 * std::max(1.0, H.diagonal().maxCoeff());
      const Vector step = -H.ldlt().solve(e.grad);
      const double decrement = -e.grad.dot(step);
      if (!(decrement > 1e-12)) break;
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        const Vector trial = v + alpha * step;
        const Evaluation te = evaluate(constraints, trial, tau, false);
        if (te.feasible && te.value <= e.value - 0.25 * alpha * decrement) {
          v = trial;
          moved = true;
          break;
        }
      }
      ++out.newton_steps;
      if (!moved || decrement < 1e-10) break;
      if (v[d] > margin_cap) break;
    }
    if (v[d] > margin_cap || static_cast<double>(barrier_dim) / tau < gap_tol) break;
    tau *= 10.0;
  }
  out.y = v.head(d);
  out.margin = v[d];
  return out;
}

}  // namespace ctql
