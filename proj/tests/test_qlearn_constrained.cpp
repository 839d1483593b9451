#include <doctest.h>

#include "ctql/error.hpp"
#include "ctql/oracle.hpp"
#include "ctql/qlearn_constrained.hpp"
#include "ctql/stabilizer.hpp"
#include "ctql/tensor.hpp"
#include "fixtures.hpp"

using namespace ctql;

namespace {

struct Setup {
  double lambda;
  BasisSpec basis = quadratic_basis(3);
  Matrix K0;
  Vector x0 = Eigen::Vector3d(1, 0, 0);

  explicit Setup(double bound) : lambda(bound) {
    Plant p = plant();
    const auto segs = p.run_episode(behavior_policy(1, 50.0 / 15.0, 1, lambda), 1.0, 20);
    K0 = basis_gain_from_linear(lmi_stabilizing_gain(collect_lqr_data(segs)).K, basis);
  }

  Plant plant() const {
    return Plant({test::f16_A(), test::f16_B()},
                 CostOracle::constrained(Matrix::Identity(3, 3), Vector::Ones(1), lambda), x0,
                 1e-4);
  }

  ConstrainedSetup setup() const { return {basis, 0.0, lambda}; }

  LearningConfig config() const {
    LearningConfig cfg;
    cfg.eps = 1e-3;
    cfg.max_iter = 15;
    cfg.mode = SolveMode::LeastSquares;
    cfg.window = 0;
    return cfg;
  }

  ConstrainedOracleSolution oracle(const Vector& extent) const {
    const ConstrainedProblem prob{test::f16_A(), test::f16_B(), Matrix::Identity(3, 3),
                                  Vector::Ones(1), 0.0, lambda, basis};
    return constrained_pi_oracle(prob, K0, sample_box(extent, 500, 11));
  }
};

}  // namespace

TEST_CASE("interval learner under a tight bound") {
  const Setup s(1.5);
  Plant plant = s.plant();
  const ConstrainedTrace tr = alg4_run(plant, s.K0, s.setup(), s.config());
  CHECK(tr.status == TerminationStatus::Converged);
  CHECK(tr.max_abs_input < 1.5);
  const auto orc = s.oracle(tr.state_extent);
  CHECK(spectral_norm(tr.last().K_linear - orc.K_linear) <= 1e-2);
  CHECK(spectral_norm(unvec_s(tr.last().W) - unvec_s(orc.W)) <= 1e-2);
}

TEST_CASE("exploration learner under a tight bound") {
  const Setup s(1.5);
  Plant plant = s.plant();
  const ConstrainedTrace tr = alg5_run(plant, s.K0, s.setup(), s.config());
  CHECK(tr.status == TerminationStatus::Converged);
  CHECK(tr.max_abs_input < 1.5);
  const auto orc = s.oracle(tr.state_extent);
  CHECK(spectral_norm(tr.last().K_linear - orc.K_linear) <= 1e-2);
}

TEST_CASE("a loose bound recovers the unconstrained solution") {
  const Setup s(1e6);
  const OracleSolution lqr = kleinman(test::f16_A(), test::f16_B(), Matrix::Identity(3, 3),
                                      Matrix::Identity(1, 1), Matrix::Zero(1, 3));
  LearningConfig cfg = s.config();
  cfg.eps = 1e-6;
  cfg.max_iter = 20;
  for (const bool explore : {false, true}) {
    Plant plant = s.plant();
    const ConstrainedTrace tr = explore ? alg5_run(plant, s.K0, s.setup(), cfg)
                                        : alg4_run(plant, s.K0, s.setup(), cfg);
    CHECK(spectral_norm(unvec_s(tr.last().W) - lqr.P_star) <= 1e-4);
    CHECK(spectral_norm(tr.last().K_linear - lqr.K_star) <= 1e-4);
    CHECK(tr.last().Lambda_uu[0] == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("tracking error report on the augmented plant") {
  const AugmentedSystem aug = augment(test::f16_A(), test::f16_B(), test::f16_A());
  const BasisSpec basis = quadratic_basis(6);
  const ConstrainedSetup setup{basis, 0.0, 10.0};
  Vector X0 = Vector::Zero(6);
  X0[3] = 0.5;
  // Reference and plant share the dynamics, so zero error stays zero under zero gain.
  const TrackingReport rep = tracking_error_report(
      aug.dynamics(), Matrix::Zero(1, basis.grad_vec_size()), setup, X0, 3, 2.0);
  CHECK(rep.rms_error <= 1e-12);
  CHECK(rep.max_abs_input == 0.0);
}
