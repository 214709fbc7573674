#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace dqcut;

namespace {

MiqpInstance diag_box() {
  return make_instance(Eigen::Vector2d(-1, 2).asDiagonal().toDenseMatrix(), VectorXd::Zero(2), MatrixXd(0, 2),
                       VectorXd(0), {VariableDomain::interval(0, 1), VariableDomain::interval(0, 1)});
}

MiqpInstance nullspace_example() {
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, -1;
  MatrixXd A(1, 2);
  A << 1, 1;
  return make_instance(Q, VectorXd::Zero(2), A, VectorXd::Ones(1),
                       {VariableDomain::interval(0, 1), VariableDomain::interval(0, 1)});
}

double tol(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

}  // namespace

TEST(Relax, AlphaIsZeroWithoutRows) {
  const auto s = select_alpha(diag_box());
  EXPECT_EQ(s.alpha, 0.0);
  EXPECT_DOUBLE_EQ(s.mu, 1.0);
}

TEST(Relax, AlphaSequenceApproachesNullspaceShift) {
  const auto inst = nullspace_example();
  const auto s = select_alpha(inst);
  EXPECT_GT(s.alpha, 0.0);
  EXPECT_FALSE(s.capped);
  EXPECT_NEAR(s.mu, 2.5, 1e-2);
  EXPECT_NEAR(mu_of_alpha(inst.Q, inst.A, 1e8), 2.5, 1e-6);
  for (std::size_t k = 1; k < s.trace.size(); ++k) EXPECT_LE(s.trace[k].second, s.trace[k - 1].second + 1e-12);
}

TEST(Relax, AlphaShiftVanishesWhenConvexOnNullspace) {
  MatrixXd Q(2, 2);
  Q << 1, 0, 0, -1;
  MatrixXd A(1, 2);
  A << 0, 1;
  const auto inst = make_instance(Q, VectorXd::Zero(2), A, VectorXd::Zero(1),
                                  {VariableDomain::interval(0, 1), VariableDomain::interval(-1, 1)});
  EXPECT_NEAR(mu_of_alpha(Q, A, 1e8), 0.0, 1e-6);
  EXPECT_FALSE(initial_perturbation(inst, select_alpha(inst).alpha).has_value());
}

TEST(Relax, InitialPerturbation) {
  const auto d = initial_perturbation(diag_box(), 0.0);
  ASSERT_TRUE(d);
  EXPECT_TRUE(d->isApprox(VectorXd::Ones(2)));
  const auto inst = nullspace_example();
  const auto d2 = initial_perturbation(inst, select_alpha(inst).alpha);
  ASSERT_TRUE(d2);
  EXPECT_NEAR((*d2)(0), 2.5, 1e-9);
  const auto convex = make_instance(MatrixXd::Identity(2, 2), VectorXd::Zero(2), MatrixXd(0, 2), VectorXd(0),
                                    {VariableDomain::interval(0, 1), VariableDomain::interval(0, 1)});
  EXPECT_FALSE(initial_perturbation(convex, 0.0));
}

TEST(Relax, EigenvalueRelaxationBoxExample) {
  const auto inst = diag_box();
  const auto r = solve_eigenvalue_relaxation(inst, 1.0);
  ASSERT_TRUE(r.certified());
  EXPECT_NEAR(r.bound, -13.0 / 12.0, 1e-7);
  // Grid oracle of min 3 x2^2 - x1 - x2 over the box (the relaxation).
  double best = 1e300;
  for (int i = 0; i <= 600; ++i)
    for (int j = 0; j <= 600; ++j) {
      const double a = i / 600.0, b = j / 600.0;
      best = std::min(best, 3 * b * b - a - b);
    }
  EXPECT_NEAR(r.bound, best, 1e-5);
  EXPECT_LE(r.bound, -1.0);
}

TEST(Relax, EigenvalueRelaxationConvexIsContinuousMinimum) {
  const auto inst = make_instance(MatrixXd::Identity(2, 2), Eigen::Vector2d(-1, 4), MatrixXd(0, 2), VectorXd(0),
                                  {VariableDomain::interval(-1, 1), VariableDomain::interval(-1, 1)});
  const auto r = solve_eigenvalue_relaxation(inst, 0.0);
  // min x1^2 - x1 + x2^2 + 4 x2 -> x = (0.5, -1): -0.25 - 3.
  EXPECT_NEAR(r.bound, -3.25, 1e-7);
  EXPECT_NEAR(r.x(0), 0.5, 1e-5);
  EXPECT_NEAR(r.x(1), -1.0, 1e-5);
}

TEST(Relax, EigenvalueRelaxationFixedPoint) {
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, -1;
  const auto inst = make_instance(Q, Eigen::Vector2d(1, 1), MatrixXd::Identity(2, 2), Eigen::Vector2d(0.3, 0.6),
                                  {VariableDomain::interval(0, 1), VariableDomain::interval(0, 1)});
  const auto r = solve_eigenvalue_relaxation(inst, 3.0);
  EXPECT_NEAR(r.bound, evaluate_objective(inst, Eigen::Vector2d(0.3, 0.6)), 1e-12);
}

TEST(Relax, EigenvalueRelaxationInfeasible) {
  MatrixXd A(1, 2);
  A << 1, 1;
  const auto inst = make_instance(MatrixXd::Zero(2, 2), VectorXd::Zero(2), A, VectorXd::Constant(1, 3.0),
                                  {VariableDomain::interval(0, 1), VariableDomain::interval(0, 1)});
  EXPECT_THROW(solve_eigenvalue_relaxation(inst, 0.0), InfeasibleError);
  EXPECT_TRUE(reduce(inst, inst.lower_bounds(), inst.upper_bounds()).infeasible);
}

TEST(Relax, SingleCutQcpMatchesEigenvalueQp) {
  for (int k = 0; k < 9; ++k) {
    const auto inst = dqcut::testing::family_instance(k, 6);
    const auto d0 = initial_perturbation(inst, select_alpha(inst).alpha);
    if (!d0) continue;
    const ReducedProblem R = reduce(inst, inst.lower_bounds(), inst.upper_bounds());
    const auto qp = solve_qp_reduced(inst, R, *d0);
    const auto model = assemble_qcp(R, {*d0});
    const auto qcp = solve_qcp(inst, model);
    ASSERT_TRUE(qp.certified());
    ASSERT_TRUE(qcp.certified());
    EXPECT_NEAR(qp.bound, qcp.bound, 1e-6 * std::max(1.0, std::abs(qp.bound))) << "instance " << k;
    // Duplicating the cut changes nothing; multipliers split.
    const auto dup = solve_qcp(inst, assemble_qcp(R, {*d0, *d0}));
    EXPECT_NEAR(dup.bound, qcp.bound, 1e-6 * std::max(1.0, std::abs(qp.bound)));
    EXPECT_NEAR(dup.cut_multipliers.sum(), qcp.cut_multipliers.sum(), 1e-4);
  }
}

TEST(Relax, PureBinaryModelHasNoHullVariables) {
  const auto inst = dqcut::testing::family_instance(1, 6);
  const ReducedProblem R = reduce(inst, inst.lower_bounds(), inst.upper_bounds());
  const auto model = assemble_qcp(R, {VectorXd::Constant(inst.n, 100.0)});
  for (int s : model.y_slot) EXPECT_EQ(s, -1);
  EXPECT_EQ(model.v_slot, model.k);
  EXPECT_THROW(assemble_qcp(R, {}), DomainError);
}

TEST(Relax, QpChildMatchesEigenvalueAtRoot) {
  const auto inst = diag_box();
  const auto a = solve_qp_child(inst, VectorXd::Ones(2), inst.lower_bounds(), inst.upper_bounds());
  const auto b = solve_eigenvalue_relaxation(inst, 1.0);
  EXPECT_NEAR(a.bound, b.bound, 1e-9);
}

TEST(Relax, QpChildBinaryHullIsIdentity) {
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, 0;
  const auto inst = make_instance(Q, Eigen::Vector2d(-1, -1), MatrixXd(0, 2), VectorXd(0),
                                  {VariableDomain::binary(), VariableDomain::binary()});
  for (const VectorXd& d : {VectorXd(Eigen::Vector2d(2, 2)), VectorXd(Eigen::Vector2d(5, 1))}) {
    const auto r = solve_qp_child(inst, d, inst.lower_bounds(), inst.upper_bounds());
    ASSERT_TRUE(r.certified());
    EXPECT_LE((r.y - r.x).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(solve_qp_child(inst, Eigen::Vector2d(5, -1), inst.lower_bounds(), inst.upper_bounds()), NumericalError);
}

TEST(Relax, CutViolation) {
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, -1;
  const VectorXd x = Eigen::Vector2d(0.5, 0.5), y = Eigen::Vector2d(0.5, 0.5);
  EXPECT_DOUBLE_EQ(cut_violation(Q, VectorXd::Zero(2), x, y, 0.1), x.dot(Q * x) - 0.1);
  EXPECT_TRUE(violates(1e-5, 0.0));
  EXPECT_FALSE(violates(1e-7, 0.0));
  EXPECT_FALSE(violates(5e-6, 10.0));
}

TEST(Relax, CutViolationOnExampleOneFixture) {
  // Single cut d0 = 1.5 mu 1 at alpha = 1; the relaxation point x = y = 0.5
  // with v at that cut's value is cut off by d = (2, 2).
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, -1;
  const VectorXd x = Eigen::Vector2d(0.5, 0.5), y = Eigen::Vector2d(0.5, 0.5);
  const VectorXd d0 = VectorXd::Constant(2, 10.0);
  const double v = cut_violation(Q, d0, x, y, 0.0);
  EXPECT_NEAR(cut_violation(Q, d0, x, y, v), 0.0, 1e-15);
  EXPECT_GT(cut_violation(Q, VectorXd::Constant(2, 2.0), x, y, v), 0.0);
}

TEST(Relax, SurrogatePerturbation) {
  const VectorXd a = VectorXd::Constant(3, 7.0);
  EXPECT_TRUE(surrogate_perturbation({a}, VectorXd::Constant(1, 0.3)).isApprox(a));
  EXPECT_TRUE(surrogate_perturbation({a, a}, Eigen::Vector2d(0.2, 0.5)).isApprox(a));
  EXPECT_TRUE(surrogate_perturbation({VectorXd::Zero(3), VectorXd::Constant(3, 4.0)}, Eigen::Vector2d(1, 3))
                  .isApprox(VectorXd::Constant(3, 3.0)));
  EXPECT_EQ(surrogate_perturbation({VectorXd::Zero(3), a}, Eigen::Vector2d(0, 0)), VectorXd::Zero(3));

  CutPool pool;
  pool.cuts = {VectorXd::Constant(3, 9.0), VectorXd::Zero(3), VectorXd::Constant(3, 4.0)};
  pool.multipliers = Eigen::Vector3d(5, 1, 3);
  EXPECT_TRUE(surrogate_root_perturbation(pool).isApprox(VectorXd::Constant(3, 3.0)));
  pool.multipliers = Eigen::Vector3d(5, 0, 0);
  EXPECT_EQ(surrogate_root_perturbation(pool), pool.cuts[0]);
}

TEST(Relax, CuttingSurfaceWithoutCutsReturnsInitialBound) {
  const auto inst = dqcut::testing::family_instance(0, 8);
  CuttingSurfaceConfig cfg;
  cfg.max_cuts = 0;
  const auto r = cutting_surface(inst, select_alpha(inst).alpha, cfg);
  EXPECT_EQ(r.pool.size(), 1u);
  EXPECT_EQ(r.bound, r.initial_bound);
}

TEST(Relax, CuttingSurfaceStopsWhenRelaxationIsExact) {
  // Concave in x1 only; the eigenvalue relaxation puts x1 at a vertex.
  // The linear term keeps x2 = 1 strictly optimal under d0 = (1, 1).
  const auto inst = make_instance(Eigen::Vector2d(-1, 0).asDiagonal().toDenseMatrix(), Eigen::Vector2d(0, -2),
                                  MatrixXd(0, 2), VectorXd(0),
                                  {VariableDomain::binary(), VariableDomain::interval(0, 1)});
  const auto r = cutting_surface(inst, 0.0);
  EXPECT_EQ(r.pool.size(), 1u);
  EXPECT_EQ(r.stop_reason, "relaxation exact");
  EXPECT_NEAR(r.bound, -3.0, 1e-7);
}

TEST(Relax, CuttingSurfaceOnBoxQpBatch) {
  int strictly = 0, nontrivial = 0;
  for (int s = 0; s < 8; ++s) {
    GeneratorOptions g;
    g.family = Family::boxqp;
    g.n = 10;
    g.density = 0.7;
    g.seed = 300 + static_cast<std::uint64_t>(s);
    const auto inst = generate_instance(g);
    const auto r = cutting_surface(inst, 0.0);
    if (r.convex) continue;
    EXPECT_GE(r.bound, r.initial_bound - tol(r.initial_bound));
    for (std::size_t k = 1; k < r.bounds.size(); ++k) EXPECT_GE(r.bounds[k], r.bounds[k - 1] - tol(r.bounds[k]));
    const RelaxationSolution first = solve_eigenvalue_relaxation(inst, std::max(0.0, -min_eigenvalue(inst.Q)));
    const VectorXd eta = (first.y - first.x.cwiseProduct(first.x)).cwiseMax(0.0);
    if (eta.maxCoeff() > 1e-6) {
      ++nontrivial;
      if (r.bound > r.initial_bound + tol(r.initial_bound)) ++strictly;
    }
  }
  EXPECT_GT(nontrivial, 0);
  EXPECT_EQ(strictly, nontrivial);
}

TEST(Relax, PoolCutsAreValidAndConvex) {
  for (int k = 0; k < 9; ++k) {
    const auto inst = dqcut::testing::family_instance(k, 8);
    const double alpha = select_alpha(inst).alpha;
    const auto r = cutting_surface(inst, alpha);
    if (r.convex) continue;
    const MatrixXd Z = nullspace_basis(inst.A).Z;
    const ReducedProblem R = reduce(inst, inst.lower_bounds(), inst.upper_bounds());
    for (const auto& d : r.pool.cuts) {
      EXPECT_GE(projected_min_eigenvalue(MatrixXd(R.Q + MatrixXd(R.restrict(d).asDiagonal())), R.Z), -1e-6);
    }
    for (const auto& x : dqcut::testing::sample_feasible(inst, 200, 77 + k)) {
      const double v = x.dot(inst.Q * x);
      const VectorXd y = x.cwiseProduct(x);
      for (const auto& d : r.pool.cuts) EXPECT_LE(cut_violation(inst.Q, d, x, y, v), 1e-8);
    }
  }
}

TEST(Relax, BoundOrderingBelowOptimum) {
  for (int k = 0; k < 12; ++k) {
    // The continuous oracle enumerates faces, so box instances stay small.
    const auto inst = dqcut::testing::family_instance(k, k % 3 == 0 ? 4 : 7);
    const auto as = select_alpha(inst);
    const double mu = std::max(0.0, -min_eigenvalue(inst.Q));
    const double mu_ns = std::max(0.0, -projected_min_eigenvalue(inst.Q, nullspace_basis(inst.A).Z));
    const double eig = solve_eigenvalue_relaxation(inst, mu).bound;
    const double eigns = solve_eigenvalue_relaxation(inst, mu_ns).bound;
    const auto cs = cutting_surface(inst, as.alpha);
    const double bound = cs.convex ? eigns : cs.bound;
    EXPECT_GE(eigns, eig - tol(eig));
    EXPECT_GE(bound, eigns - tol(eigns));
    const auto opt = brute_force_oracle(inst);
    ASSERT_TRUE(opt.feasible);
    EXPECT_LE(bound, opt.value + tol(opt.value)) << "instance " << k;
  }
}
