#include <doctest.h>

#include "ctql/error.hpp"
#include "ctql/oracle.hpp"
#include "ctql/stabilizer.hpp"
#include "ctql/tensor.hpp"
#include "fixtures.hpp"

using namespace ctql;

namespace {

LqrBank behavior_bank(const Matrix& A, const Matrix& B, std::uint64_t seed, double dt = 1e-4) {
  const Eigen::Index n = A.rows();
  Vector x0 = Vector::Zero(n);
  x0[0] = 1.0;
  Plant plant({A, B}, CostOracle::quadratic(Matrix::Identity(n, n), Matrix::Identity(1, 1)), x0,
              dt);
  return collect_lqr_data(plant.run_episode(behavior_policy(seed, 50.0 / 15.0), 1.0, 20));
}

}  // namespace

TEST_CASE("Pi and B estimate from behavior data") {
  const Matrix A = test::f16_A();
  const Matrix B = test::f16_B();
  const PiBEstimate est = estimate_pi_b(behavior_bank(A, B, 1));
  CHECK((est.B - B).norm() <= 1e-4);
  CHECK((est.Pi - (A + A.transpose())).norm() <= 1e-3);

  // With B = 0 a single trajectory stays on a ray, so the bank needs resets.
  Plant plant({-Matrix::Identity(2, 2), Matrix::Zero(2, 1)},
              CostOracle::quadratic(Matrix::Identity(2, 2), Matrix::Identity(1, 1)),
              Vector::Zero(2), 1e-4);
  const ControlLaw behavior = behavior_policy(2, 50.0 / 15.0);
  const PiBEstimate trivial =
      estimate_pi_b(collect_lqr_data(collect_reset_segments(plant, 10, 1.0, 2, 3, &behavior)));
  CHECK((trivial.Pi + 2.0 * Matrix::Identity(2, 2)).norm() <= 1e-6);
  CHECK(trivial.B.norm() <= 1e-6);
}

TEST_CASE("data-driven LMI gain stabilizes the F-16 model") {
  const Matrix A = test::f16_A();
  const Matrix B = test::f16_B();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const LmiResult res = lmi_stabilizing_gain(behavior_bank(A, B, seed, 1e-3));
    CHECK(is_hurwitz(A - B * res.K));
    CHECK(res.margin > 0.0);
    CHECK((res.K - lmi_gain(res.S, res.varpi, B).eval()).norm() <= 1e-2 * std::max(1.0, res.K.norm()));
  }
}

TEST_CASE("LMI gain on an unstable plant") {
  Matrix A = test::f16_A();
  A(2, 2) = 0.5;
  const LmiResult res = model_lmi_gain(A, test::f16_B());
  CHECK(is_hurwitz(A - test::f16_B() * res.K));
  const LmiResult data = lmi_stabilizing_gain(behavior_bank(A, test::f16_B(), 3));
  CHECK(is_hurwitz(A - test::f16_B() * data.K));
}

TEST_CASE("LMI gain is zero without an input channel") {
  LmiData data;
  data.Pi = -2.0 * Matrix::Identity(2, 2);
  data.B = Matrix::Zero(2, 1);
  const Matrix A = -Matrix::Identity(2, 2);
  data.gamma_xx = [A](const Matrix& S) { return Matrix(A.transpose() * S + S * A); };
  const LmiResult res = solve_stabilizing_lmi(data);
  CHECK(res.K.norm() == 0.0);
}

TEST_CASE("an unstabilizable model is reported") {
  const Matrix A = Matrix::Identity(2, 2);
  try {
    model_lmi_gain(A, Matrix::Zero(2, 1));
    FAIL("expected NotStabilizable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotStabilizable);
  }
}

TEST_CASE("state weight estimate from zero-input resets") {
  const Matrix M = Vector(Eigen::Vector3d(1, 2, 0.5)).asDiagonal();
  Plant plant({test::f16_A(), test::f16_B()}, CostOracle::quadratic(M, Matrix::Identity(1, 1)),
              Vector::Zero(3), 1e-4);
  const auto resets = collect_reset_segments(plant, 10, 1.0, 1, 5);
  CHECK(resets.size() == 10);
  CHECK((estimate_M(resets, Matrix::Identity(3, 3)) - M).norm() <= 1e-4);

  const auto single = collect_reset_segments(plant, 1, 1.0, 1, 5);
  try {
    estimate_M(single, Matrix::Identity(3, 3));
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
}

TEST_CASE("Gramian gain") {
  const Matrix A = test::f16_A();
  const Matrix B = test::f16_B();
  Plant plant({A, B}, CostOracle::quadratic(Matrix::Identity(3, 3), Matrix::Identity(1, 1)),
              Vector::Zero(3), 1e-4);
  const auto resets = collect_reset_segments(plant, 10, 1.0, 1, 9);

  SUBCASE("undiscounted case solves the Lyapunov equation") {
    const Matrix M = Matrix::Identity(3, 3);
    const GramianResult g = gramian_admissible_gain(resets, 0.0, M, Matrix::Identity(3, 3), B);
    const Matrix S = lyapunov_solve(A, M);
    CHECK((g.S - S).norm() <= 1e-4 * S.norm());
    CHECK((g.K_hyp - B.transpose() * g.S).norm() <= 1e-12);
  }
  SUBCASE("zero state weight gives a zero gain") {
    const GramianResult g =
        gramian_admissible_gain(resets, 0.1, Matrix::Zero(3, 3), Matrix::Identity(3, 3), B);
    CHECK(g.S.norm() <= 1e-12);
    CHECK(g.K_hyp.norm() <= 1e-12);
  }
  SUBCASE("a rejecting check raises NotAdmissible") {
    const AdmissibilityCheck never = [](const Matrix&) { return false; };
    try {
      gramian_admissible_gain(resets, 0.0, Matrix::Identity(3, 3), Matrix::Identity(3, 3), B,
                              &never);
      FAIL("expected NotAdmissible");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotAdmissible);
    }
  }
}

TEST_CASE("bounded closed-loop check") {
  Matrix A = Matrix::Identity(1, 1);  // unstable
  const LtiSystem sys{A, Matrix::Ones(1, 1)};
  const AdmissibilityCheck check = bounded_closed_loop_check(sys, Vector::Constant(1, 0.1), 10.0);
  CHECK(check(Matrix::Constant(1, 1, 3.0)));
  CHECK_FALSE(check(Matrix::Zero(1, 1)));
}

TEST_CASE("admissible search") {
  const Matrix K_hyp = Matrix::Constant(1, 1, 1.0);
  const AdmissibilityCheck any = [](const Matrix&) { return true; };
  const SearchResult first = admissible_search(K_hyp, kDefaultScaleGrid, any);
  CHECK(first.scale == 1.0);
  CHECK(first.K == K_hyp);

  const AdmissibilityCheck large = [](const Matrix& K) { return K(0, 0) > 1.5; };
  const SearchResult grown = admissible_search(K_hyp, kDefaultScaleGrid, large);
  CHECK(grown.scale == 2.0);

  const AdmissibilityCheck none = [](const Matrix&) { return false; };
  try {
    admissible_search(K_hyp, kDefaultScaleGrid, none);
    FAIL("expected SearchExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SearchExhausted);
  }
}
