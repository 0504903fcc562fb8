#include <catch_amalgamated.hpp>

#include <mooqp/problem.hpp>

using namespace mooqp;

namespace {

MooProblem tiny_problem() {
  MooProblem prob;
  prob.N = 2;
  prob.M = 2;
  prob.gamma = 2.0;
  prob.p = Matrix(2, 2);
  prob.p << 0.1, 0.2, 0.3, 0.4;
  prob.r = Matrix(2, 2);
  prob.r << 0.5, 0.6, 0.7, 0.8;
  prob.q = Matrix(2, 2);
  prob.q << 0.05, 0.1, 0.15, 0.2;
  return prob;
}

}  // namespace

TEST_CASE("flattening is user-major and a = p + gamma q") {
  MooProblem prob = tiny_problem();
  Vector a = prob.a_flat();
  REQUIRE(a.size() == 4);
  // coordinate u*M + i
  CHECK(a[0] == Catch::Approx(0.1 + 2.0 * 0.05));
  CHECK(a[1] == Catch::Approx(0.2 + 2.0 * 0.1));
  CHECK(a[2] == Catch::Approx(0.3 + 2.0 * 0.15));
  CHECK(a[3] == Catch::Approx(0.4 + 2.0 * 0.2));

  Vector fr = prob.flatten(prob.r);
  CHECK(fr[2] == Catch::Approx(0.7));
}

TEST_CASE("objective matches the explicit formula") {
  MooProblem prob = tiny_problem();
  Vector x(4);
  x << 0.5, 0.0, 1.0, 0.25;
  Vector a = prob.a_flat();
  double expected = -a.dot(x) + 0.5 * prob.gamma * x.squaredNorm();
  CHECK(prob.objective(x) == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("budget weights resolve references and user masks") {
  MooProblem prob = tiny_problem();
  GlobalBudget g;
  g.ref = GlobalBudget::Ref::R;
  Vector w = prob.budget_weights(g);
  CHECK(w[0] == Catch::Approx(0.5));
  CHECK(w[3] == Catch::Approx(0.8));

  g.users = {1};
  w = prob.budget_weights(g);
  CHECK(w[0] == 0.0);
  CHECK(w[1] == 0.0);
  CHECK(w[2] == Catch::Approx(0.7));

  g.ref = GlobalBudget::Ref::Inline;
  g.users.clear();
  g.weights = Matrix::Constant(2, 2, 0.25);
  w = prob.budget_weights(g);
  CHECK(w.sum() == Catch::Approx(1.0));
}

TEST_CASE("validate flags out-of-range scores with coordinates") {
  MooProblem prob = tiny_problem();
  prob.p(1, 1) = 1.5;
  auto rep = validate(prob);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.message == "p out of [0,1] at (1,1)") found = true;
  CHECK(found);
}

TEST_CASE("validate catches structural problems") {
  SECTION("gamma") {
    MooProblem prob = tiny_problem();
    prob.gamma = 0.0;
    auto rep = validate(prob);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.violations[0].message == "gamma must be positive");
  }
  SECTION("inline weights shape") {
    MooProblem prob = tiny_problem();
    GlobalBudget g;
    g.ref = GlobalBudget::Ref::Inline;
    g.weights = Matrix::Zero(1, 2);
    prob.budgets.push_back(g);
    CHECK_FALSE(validate(prob).ok());
  }
  SECTION("two locals on one user") {
    MooProblem prob = tiny_problem();
    LocalConstraint a;
    a.kind = LocalConstraint::Kind::SumCap;
    a.user = 0;
    a.cap = 1.0;
    prob.locals.push_back(a);
    prob.locals.push_back(a);
    CHECK_FALSE(validate(prob).ok());
  }
  SECTION("infeasible general region") {
    MooProblem prob = tiny_problem();
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::GeneralLinear;
    lc.user = 0;
    lc.A = Matrix(2, 2);
    lc.A << 1.0, 1.0, -1.0, -1.0;  // x0+x1 <= 0.2 and x0+x1 >= 1.5
    lc.b = Vector(2);
    lc.b << 0.2, -1.5;
    prob.locals.push_back(lc);
    CHECK_FALSE(validate(prob).ok());
  }
  SECTION("floor beyond the box") {
    MooProblem prob = tiny_problem();
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SumFloor;
    lc.user = 1;
    lc.floor_bound = 3.0;  // only two items available
    prob.locals.push_back(lc);
    CHECK_FALSE(validate(prob).ok());
  }
  SECTION("clean instance passes") {
    CHECK(validate(tiny_problem()).ok());
  }
}

TEST_CASE("user scores apply budget duals with direction signs") {
  MooProblem prob = tiny_problem();
  GlobalBudget cap;
  cap.ref = GlobalBudget::Ref::R;
  cap.cmp = Cmp::LessEq;
  cap.bound = 1.0;
  GlobalBudget floor;
  floor.ref = GlobalBudget::Ref::P;
  floor.cmp = Cmp::GreaterEq;
  floor.bound = 0.1;
  prob.budgets = {cap, floor};

  auto scores = user_scores(prob, {0.5, 0.25});
  Vector a = prob.a_flat();
  // LessEq subtracts mu * w, GreaterEq adds it.
  CHECK(scores[0].c[0] == Catch::Approx(a[0] - 0.5 * 0.5 + 0.25 * 0.1));
  CHECK(scores[1].c[1] == Catch::Approx(a[3] - 0.5 * 0.8 + 0.25 * 0.4));
  CHECK(scores[0].user == 0);
  CHECK(scores[1].gamma == Catch::Approx(prob.gamma));

  CHECK_THROWS_AS(user_scores(prob, {0.5}), DimensionMismatch);
}

TEST_CASE("local lookup returns at most one set per user") {
  MooProblem prob = tiny_problem();
  LocalConstraint lc;
  lc.kind = LocalConstraint::Kind::SumCap;
  lc.user = 1;
  lc.cap = 1.0;
  prob.locals.push_back(lc);
  CHECK(prob.local_for(0) == nullptr);
  REQUIRE(prob.local_for(1) != nullptr);
  CHECK(prob.local_for(1)->cap == Catch::Approx(1.0));
}
