#include "ctql/tensor.hpp"

#include <cmath>
#include <string>

#include "ctql/error.hpp"

namespace ctql {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::SaturationDomain: return "SaturationDomain";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::MissingNoiseRecord: return "MissingNoiseRecord";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NotAdmissible: return "NotAdmissible";
    case ErrorCode::SearchExhausted: return "SearchExhausted";
    case ErrorCode::NumericallyIllConditioned: return "NumericallyIllConditioned";
    case ErrorCode::MixedProblem: return "MixedProblem";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Eigen::Index sym_dim_from_size(Eigen::Index len) {
  if (len < 0) return -1;
  const auto n = static_cast<Eigen::Index>(
      std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  return sym_size(n) == len ? n : -1;
}

Eigen::Index sym_index(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  // Rows before i hold n + (n-1) + ... + (n-i+1) entries.
  return i * n - i * (i - 1) / 2 + (j - i);
}

SymVec::SymVec(Vector data) : data_(std::move(data)) {
  n_ = sym_dim_from_size(data_.size());
  if (n_ < 0) {
    throw Error(ErrorCode::BadLength,
                "length " + std::to_string(data_.size()) + " is not triangular");
  }
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a[i] * b;
  }
  return out;
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw Error(ErrorCode::BadLength, "unvec: size does not match shape");
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

SymVec sym_kron_vec(const Vector& x) {
  const Eigen::Index n = x.size();
  Vector out(sym_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) out[k++] = x[i] * x[j];
  }
  return SymVec(std::move(out));
}

Vector sym_kron(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sym_kron: operand sizes differ");
  }
  const Eigen::Index n = a.size();
  Vector out(sym_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out[k++] = a[i] * b[i];
    for (Eigen::Index j = i + 1; j < n; ++j) out[k++] = 0.5 * (a[i] * b[j] + a[j] * b[i]);
  }
  return out;
}

SymVec vec_s(const Matrix& p, double tol) {
  if (p.rows() != p.cols()) {
    throw Error(ErrorCode::NotSymmetric, "vec_s: matrix is not square");
  }
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw Error(ErrorCode::NotSymmetric, "vec_s: matrix is not symmetric");
  }
  const Eigen::Index n = p.rows();
  Vector out(sym_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out[k++] = p(i, i);
    for (Eigen::Index j = i + 1; j < n; ++j) out[k++] = p(i, j) + p(j, i);
  }
  return SymVec(std::move(out));
}

Matrix unvec_s(const SymVec& v) {
  const Eigen::Index n = v.dim();
  Matrix p(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i, i) = v[k++];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      p(i, j) = p(j, i) = 0.5 * v[k++];
    }
  }
  return p;
}

Matrix unvec_s(const Vector& v) { return unvec_s(SymVec(v)); }

Eigen::Index lqr_unknown_count(Eigen::Index n, Eigen::Index m) {
  return sym_size(n) + m * n + sym_size(m);
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  return Eigen::JacobiSVD<Matrix>(m).singularValues()[0];
}

}  // namespace ctql
