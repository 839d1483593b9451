#pragma once

#include <random>

#include "ctql/types.hpp"

namespace ctql::test {

// F-16 short-period model with actuator state.
inline Matrix f16_A() {
  Matrix A(3, 3);
  A << -1.01887, 0.90506, -0.00215,
        0.82225, -1.07741, -0.17555,
        0.0, 0.0, -1.0;
  return A;
}

inline Matrix f16_B() {
  Matrix B(3, 1);
  B << 0.0, 0.0, 1.0;
  return B;
}

inline Matrix f16_Ar() {
  return Vector(Eigen::Vector3d(-2.0, -2.0, 0.0)).asDiagonal();
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

inline Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix a = random_matrix(rng, n, n);
  return 0.5 * (a + a.transpose());
}

}  // namespace ctql::test
