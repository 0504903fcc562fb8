#include <catch_amalgamated.hpp>

#include <mooqp/dual.hpp>
#include <mooqp/oracle.hpp>
#include <mooqp/util.hpp>

using namespace mooqp;

namespace {

// One user, one item, a = 0.5, complaint rate 0.2 capped at 0.1, and a
// full-allocation equality. Small enough to check the assembly entry by entry.
MooProblem one_by_one() {
  MooProblem prob;
  prob.N = 1;
  prob.M = 1;
  prob.gamma = 1.0;
  prob.p = Matrix::Constant(1, 1, 0.3);
  prob.q = Matrix::Constant(1, 1, 0.2);
  prob.r = Matrix::Constant(1, 1, 0.2);
  GlobalBudget g;
  g.ref = GlobalBudget::Ref::R;
  g.cmp = Cmp::LessEq;
  g.bound = 0.1;
  prob.budgets.push_back(g);
  LocalConstraint lc;
  lc.kind = LocalConstraint::Kind::SimplexEq;
  lc.user = 0;
  prob.locals.push_back(lc);
  return prob;
}

MooProblem random_simplex_instance(std::uint64_t seed, int N, int M) {
  auto rng = rep_rng(seed);
  MooProblem prob;
  prob.N = N;
  prob.M = M;
  prob.gamma = runif(rng, 0.5, 2.0);
  prob.p = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.95); });
  prob.r = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.95); });
  prob.q = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.95); });
  GlobalBudget g;
  g.ref = GlobalBudget::Ref::R;
  g.cmp = Cmp::LessEq;
  g.bound = 0.4 * M * N * 0.5;
  prob.budgets.push_back(g);
  for (int u = 0; u < N; u += 2) {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SimplexEq;
    lc.user = u;
    prob.locals.push_back(lc);
  }
  return prob;
}

}  // namespace

TEST_CASE("single-cell assembly matches the hand-derived 5-column layout") {
  DualQP qp = assemble_dual(one_by_one());
  REQUIRE(qp.dim() == 5);  // budget, nu+, nu-, xi, eta
  Matrix A = Matrix(qp.A_hat);
  REQUIRE(A.rows() == 1);
  CHECK(A(0, 0) == Catch::Approx(-0.2));
  CHECK(A(0, 1) == Catch::Approx(-1.0));
  CHECK(A(0, 2) == Catch::Approx(1.0));
  CHECK(A(0, 3) == Catch::Approx(1.0));
  CHECK(A(0, 4) == Catch::Approx(-1.0));

  Matrix B = qp.dense_B();
  CHECK(B(0, 0) == Catch::Approx(0.04));
  CHECK(B(0, 1) == Catch::Approx(0.2));
  CHECK(qp.p_tilde[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(qp.p_tilde[1] == Catch::Approx(-0.5));
  CHECK(qp.p_tilde[2] == Catch::Approx(0.5));
  CHECK(qp.p_tilde[3] == Catch::Approx(-0.5));
  CHECK(qp.p_tilde[4] == Catch::Approx(-0.5));

  CHECK(qp.index_map[0].kind == DualKind::Budget);
  CHECK(qp.index_map[1].kind == DualKind::EqUpper);
  CHECK(qp.index_map[2].kind == DualKind::EqLower);
  CHECK(qp.index_map[3].kind == DualKind::BoxLower);
  CHECK(qp.index_map[4].kind == DualKind::BoxUpper);
  CHECK(to_string(qp.index_map[0]) == "mu[0]");
}

TEST_CASE("dual dimension counts budgets, equality pairs and box columns") {
  MooProblem prob = random_simplex_instance(7, 5, 3);
  // Users 0, 2, 4 carry the full-allocation equality.
  DualQP qp = assemble_dual(prob);
  CHECK(qp.dim() == 1 + 2 * 3 + 2 * 15);
}

TEST_CASE("B is symmetric and PSD, and apply_B matches the dense matrix") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    MooProblem prob = random_simplex_instance(seed, 4, 3);
    DualQP qp = assemble_dual(prob);
    Matrix B = qp.dense_B();
    CHECK((B - B.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> es(B);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * B.norm());

    auto rng = rep_rng(seed, 99);
    Vector z = Vector::NullaryExpr(qp.dim(), [&](Index) { return runif(rng); });
    CHECK((qp.apply_B(z) - B * z).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

// The hand-derived cell above is deliberately infeasible (the equality wants
// x = 1, the cap allows 0.5), which makes its dual unbounded. Value-recovery
// checks need the feasible variant.
MooProblem feasible_one_by_one() {
  MooProblem prob = one_by_one();
  prob.budgets[0].bound = 0.5;
  return prob;
}

TEST_CASE("dual minimum recovers the primal value up to the fixed shift") {
  MooProblem prob = feasible_one_by_one();
  DualQP qp = assemble_dual(prob);
  auto zstar = oracle::nnqp_enumerate(qp.dense_B(), qp.p_tilde);
  double dmin = qp.dual_objective(zstar);
  auto primal = oracle::solve_primal_dense(prob);
  CHECK(qp.primal_value_from_dual_min(dmin) == Catch::Approx(primal.objective).margin(1e-6));
}

TEST_CASE("stationarity map reproduces the primal point") {
  MooProblem prob = feasible_one_by_one();
  DualQP qp = assemble_dual(prob);
  auto zstar = oracle::nnqp_enumerate(qp.dense_B(), qp.p_tilde);
  Vector x = primal_from_dual_stationarity(qp, zstar);
  // The equality forces full allocation of the single item.
  CHECK(x[0] == Catch::Approx(1.0).margin(1e-8));
  CHECK_THROWS_AS(primal_from_dual_stationarity(qp, Vector::Zero(2)), DimensionMismatch);
}

TEST_CASE("assembly rejects unsupported layouts and bad gamma") {
  MooProblem prob = one_by_one();
  prob.locals[0].kind = LocalConstraint::Kind::SumCap;
  prob.locals[0].cap = 0.5;
  CHECK_THROWS_AS(assemble_dual(prob), UnsupportedLayout);

  MooProblem bad = one_by_one();
  bad.gamma = 0.0;
  CHECK_THROWS_AS(assemble_dual(bad), BadParams);
}

TEST_CASE("generic row assembly appends box columns with unit signs") {
  Vector a(2);
  a << 0.4, 0.6;
  ConstraintRow row;
  row.w = Vector(2);
  row.w << 1.0, 2.0;
  row.cmp = Cmp::LessEq;
  row.bound = 1.5;
  DualQP qp = assemble_rows(a, 1.0, {row}, true);
  REQUIRE(qp.dim() == 5);
  Matrix A = Matrix(qp.A_hat);
  // LessEq flips: column 0 is -w.
  CHECK(A(0, 0) == Catch::Approx(-1.0));
  CHECK(A(1, 0) == Catch::Approx(-2.0));
  CHECK(qp.s_tilde[0] == Catch::Approx(-1.5));
  // Box lower columns are +e_i with zero offset, upper are -e_i with -1.
  CHECK(A(0, 1) == Catch::Approx(1.0));
  CHECK(A(1, 2) == Catch::Approx(1.0));
  CHECK(qp.s_tilde[1] == Catch::Approx(0.0).margin(1e-15));
  CHECK(A(0, 3) == Catch::Approx(-1.0));
  CHECK(qp.s_tilde[3] == Catch::Approx(-1.0));
}

TEST_CASE("constraint row extraction covers every local kind") {
  MooProblem prob;
  prob.N = 3;
  prob.M = 2;
  prob.gamma = 1.0;
  prob.p = Matrix::Constant(3, 2, 0.5);
  prob.r = Matrix::Constant(3, 2, 0.5);
  prob.q = Matrix::Constant(3, 2, 0.5);
  GlobalBudget g;
  g.ref = GlobalBudget::Ref::R;
  g.bound = 1.0;
  prob.budgets.push_back(g);
  LocalConstraint cap;
  cap.kind = LocalConstraint::Kind::SumCap;
  cap.user = 0;
  cap.cap = 1.0;
  prob.locals.push_back(cap);
  LocalConstraint eq;
  eq.kind = LocalConstraint::Kind::SimplexEq;
  eq.user = 1;
  prob.locals.push_back(eq);
  LocalConstraint gen;
  gen.kind = LocalConstraint::Kind::GeneralLinear;
  gen.user = 2;
  gen.A = Matrix::Identity(2, 2);
  gen.b = Vector::Constant(2, 0.8);
  prob.locals.push_back(gen);

  auto rows = all_constraint_rows(prob);
  // 1 budget + 1 cap + 2 equality halves + 2 general rows.
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].label.kind == DualKind::Budget);
  CHECK(rows[1].cmp == Cmp::LessEq);
  CHECK(rows[2].label.kind == DualKind::EqUpper);
  CHECK(rows[3].label.kind == DualKind::EqLower);
  CHECK(rows[4].label.kind == DualKind::LocalRow);
  // The cap row lives on user 0's coordinates only.
  CHECK(rows[1].w[0] == Catch::Approx(1.0));
  CHECK(rows[1].w[2] == Catch::Approx(0.0).margin(1e-15));
}
