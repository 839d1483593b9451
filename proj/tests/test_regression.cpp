#include <doctest.h>

#include <sstream>

#include "ctql/error.hpp"
#include "ctql/oracle.hpp"
#include "ctql/regression.hpp"
#include "ctql/tensor.hpp"
#include "fixtures.hpp"

using namespace ctql;

namespace {

CostOracle unit_cost(Eigen::Index n) {
  return CostOracle::quadratic(Matrix::Identity(n, n), Matrix::Identity(1, 1));
}

LqrBank f16_behavior_bank(int episodes, double dt = 1e-4) {
  Plant plant({test::f16_A(), test::f16_B()}, unit_cost(3), Eigen::Vector3d(1, 0, 0), dt);
  const ControlLaw behavior = behavior_policy(1, 50.0 / 15.0);
  LqrBank bank = collect_lqr_data(plant.run_episode(behavior, 1.0, 20));
  for (int e = 1; e < episodes; ++e) append_rows(bank, collect_lqr_data(plant.run_episode(behavior, 1.0, 20)));
  return bank;
}

}  // namespace

TEST_CASE("frozen dynamics give the analytic data row") {
  Plant plant({Matrix::Zero(2, 2), Matrix::Zero(2, 1)}, unit_cost(2), Eigen::Vector2d(1, 1), 1e-2);
  const ControlLaw zero = [](double, const Vector&) { return Vector(Vector::Zero(1)); };
  const LqrBank bank = collect_lqr_data(plant.run_episode(zero, 2.0, 1));
  REQUIRE(bank.rows() == 1);
  CHECK(bank.psi.norm() <= 1e-14);
  CHECK((bank.phi.row(0).transpose() - Eigen::Vector3d(2, 2, 2)).norm() <= 1e-12);
  CHECK(bank.mu.norm() == 0.0);
  CHECK(bank.nu.norm() == 0.0);
  CHECK(bank.xi[0] == doctest::Approx(4.0));
  CHECK(bank.varrho[0] == doctest::Approx(0.0));
}

TEST_CASE("interval data is additive over a split") {
  const LtiSystem sys{test::f16_A(), test::f16_B()};
  const ControlLaw behavior = behavior_policy(3, 50.0 / 15.0);
  Plant whole(sys, unit_cost(3), Eigen::Vector3d(1, 0, 0), 1e-3);
  Plant split(sys, unit_cost(3), Eigen::Vector3d(1, 0, 0), 1e-3);
  const LqrBank a = collect_lqr_data(whole.run_episode(behavior, 1.0, 1));
  const LqrBank b = collect_lqr_data(split.run_episode(behavior, 1.0, 2));
  REQUIRE(b.rows() == 2);
  const auto sum = [](const Matrix& m) { return Matrix(m.colwise().sum()); };
  CHECK((sum(b.phi) - a.phi).norm() <= 1e-10 * a.phi.norm());
  CHECK((sum(b.mu) - a.mu).norm() <= 1e-10 * a.mu.norm());
  CHECK((sum(b.nu) - a.nu).norm() <= 1e-10 * a.nu.norm());
  CHECK((sum(b.psi) - a.psi).norm() <= 1e-10 * std::max(1.0, a.psi.norm()));
  CHECK(std::abs(b.xi.sum() - a.xi[0]) <= 1e-10 * a.xi[0]);
}

TEST_CASE("data collection needs rewards and enough rows") {
  const LtiSystem sys{test::f16_A(), test::f16_B()};
  const ControlLaw zero = [](double, const Vector&) { return Vector(Vector::Zero(1)); };
  const auto seg = simulate_segment(sys, zero, Eigen::Vector3d(1, 0, 0), 0.0, 0.1, 1e-3);
  try {
    collect_lqr_data({seg});
    FAIL("expected InsufficientRows");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientRows);
  }
  Plant plant(sys, unit_cost(3), Eigen::Vector3d(1, 0, 0), 1e-3);
  CHECK_THROWS_AS(collect_lqr_data(plant.run_episode(zero, 1.0, 5), 10), Error);
}

TEST_CASE("bank CSV has one line per row plus a header") {
  const LqrBank bank = f16_behavior_bank(1, 1e-3);
  std::ostringstream os;
  write_bank_csv(os, bank);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == bank.rows() + 1);
}

TEST_CASE("rank check") {
  SUBCASE("behavior excitation is rich") {
    const RankDiagnostic rd = rank_check(f16_behavior_bank(1, 1e-3));
    CHECK(rd.required == 10);
    CHECK(rd.rank == 10);
    CHECK(rd.satisfied);
  }
  SUBCASE("a constant input held at its equilibrium is not") {
    const Vector xe = -test::f16_A().inverse() * test::f16_B();
    Plant plant({test::f16_A(), test::f16_B()}, unit_cost(3), xe, 1e-3);
    const ControlLaw constant = [](double, const Vector&) { return Vector(Vector::Ones(1)); };
    const RankDiagnostic rd = rank_check(collect_lqr_data(plant.run_episode(constant, 1.0, 20)));
    CHECK(rd.rank < rd.required);
    CHECK_FALSE(rd.satisfied);
  }
}

TEST_CASE("fixed-interval regression at K = 0 recovers the open-loop Q function") {
  // F-16 A is Hurwitz, so K = 0 is admissible and its value is the Lyapunov solution.
  const LqrBank bank = f16_behavior_bank(4);
  const RegressionSystem sys = assemble_alg2(bank, Matrix::Zero(1, 3), Matrix::Zero(3, 1));
  CHECK(sys.unknowns() == 6 + 3 + 1);
  CHECK(sys.rank() == sys.unknowns());
  const ThetaSolution sol = solve_theta(sys, SolveMode::Strict);
  const Matrix P = unvec_s(sol.block(sys, "P"));
  const Matrix P0 = kleinman_step(test::f16_A(), test::f16_B(), Matrix::Identity(3, 3),
                                  Matrix::Identity(1, 1), Matrix::Zero(1, 3));
  CHECK((P - P0).norm() <= 1e-5 * P0.norm());
  const Vector Lxu = sol.block(sys, "Lambda_xu");
  CHECK((Lxu - P0 * test::f16_B()).norm() <= 1e-5);
  CHECK(sol.block(sys, "Lambda_uu")[0] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("solve_theta") {
  std::mt19937_64 rng(21);
  SUBCASE("square system") {
    Matrix d(2, 2);
    d << 2, 0, 0, 4;
    const RegressionSystem sys(d, Eigen::Vector2d(2, 8), {{"a", 0, 2}});
    const ThetaSolution sol = solve_theta(sys, SolveMode::Strict);
    CHECK((sol.theta - Eigen::Vector2d(1, 2)).norm() <= 1e-14);
    CHECK(sol.residual <= 1e-14);
    CHECK(sol.condition_number == doctest::Approx(2.0));
  }
  SUBCASE("planted solution in a tall system") {
    const Matrix d = test::random_matrix(rng, 40, 7);
    const Vector theta = test::random_matrix(rng, 7, 1);
    const RegressionSystem sys(d, d * theta, {{"a", 0, 3}, {"b", 3, 4}});
    for (const SolveMode mode : {SolveMode::Strict, SolveMode::LeastSquares}) {
      const ThetaSolution sol = solve_theta(sys, mode);
      CHECK((sol.theta - theta).norm() <= 1e-10 * theta.norm());
      CHECK(sol.rank == 7);
      CHECK((sol.block(sys, "b") - theta.tail(4)).norm() <= 1e-10);
    }
  }
  SUBCASE("rank deficiency") {
    Matrix d = test::random_matrix(rng, 20, 4);
    d.col(3) = d.col(0) + d.col(1);
    const RegressionSystem sys(d, test::random_matrix(rng, 20, 1), {{"a", 0, 4}});
    CHECK(sys.rank() == 3);
    try {
      solve_theta(sys, SolveMode::Strict);
      FAIL("expected RankDeficient");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RankDeficient);
    }
    // Least squares returns the minimum-norm solution and reports the rank.
    const ThetaSolution sol = solve_theta(sys, SolveMode::LeastSquares);
    CHECK(sol.rank == 3);
    CHECK(sol.theta.allFinite());
  }
}

TEST_CASE("time-iterative regression needs recorded exploration") {
  Plant plant({test::f16_A(), test::f16_B()}, unit_cost(3), Eigen::Vector3d(1, 0, 0), 1e-3);
  const ControlLaw behavior = behavior_policy(1, 50.0 / 15.0);
  const auto segs = plant.run_episode(behavior, 1.0, 20);
  try {
    assemble_alg3(segs);
    FAIL("expected MissingNoiseRecord");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingNoiseRecord);
  }
  ConstrainedSetup setup{quadratic_basis(3), 0.0, 1.5};
  CHECK_THROWS_AS(assemble_alg5(segs, setup), Error);
}

TEST_CASE("time-iterative regression with zero target recovers the open-loop Q function") {
  Plant plant({test::f16_A(), test::f16_B()}, unit_cost(3), Eigen::Vector3d(1, 0, 0), 1e-4);
  const ControlLaw behavior = behavior_policy(1, 50.0 / 15.0);
  const ControlLaw zero = [](double, const Vector&) { return Vector(Vector::Zero(1)); };
  auto segs = plant.run_episode(behavior, 1.0, 20, &zero);
  const auto more = plant.run_episode(behavior, 1.0, 20, &zero);
  segs.insert(segs.end(), more.begin(), more.end());
  const RegressionSystem sys = assemble_alg3(segs);
  const ThetaSolution sol = solve_theta(sys, SolveMode::Strict);
  const Matrix P0 = kleinman_step(test::f16_A(), test::f16_B(), Matrix::Identity(3, 3),
                                  Matrix::Identity(1, 1), Matrix::Zero(1, 3));
  CHECK((unvec_s(sol.block(sys, "P")) - P0).norm() <= 1e-5 * P0.norm());
}

TEST_CASE("constrained assemblies have the documented layout") {
  const double lambda = 1.5;
  Plant plant({test::f16_A(), test::f16_B()},
              CostOracle::constrained(Matrix::Identity(3, 3), Vector::Ones(1), lambda),
              Eigen::Vector3d(1, 0, 0), 1e-3);
  const BasisSpec basis = quadratic_basis(3);
  const ConstrainedSetup setup{basis, 0.0, lambda};
  const ControlLaw target = saturated_policy(Matrix::Zero(1, basis.grad_vec_size()), lambda, basis);
  const ControlLaw behavior = behavior_policy(1, 50.0 / 15.0, 1, lambda);
  const auto segs = plant.run_episode(behavior, 1.0, 20, &target);

  const RegressionSystem s4 = assemble_alg4(segs, target, setup, Vector::Ones(1));
  CHECK(s4.delta().rows() == 20);
  CHECK(s4.unknowns() == 6 + basis.grad_vec_size() + 1);
  CHECK(s4.block("W").size == 6);

  const RegressionSystem s5 = assemble_alg5(segs, setup);
  CHECK(s5.unknowns() == s4.unknowns());
  CHECK(s5.delta().allFinite());
}
