#include <catch_amalgamated.hpp>

#include <mooqp/split.hpp>

using namespace mooqp;

namespace {

SolverConfig tight() {
  SolverConfig cfg;
  cfg.eps_abs = 1e-10;
  cfg.eps_rel = 1e-8;
  return cfg;
}

}  // namespace

TEST_CASE("full solve satisfies every segment floor") {
  BinaryTreeInstance inst = gen_binary_tree(3, 11);
  FullSolve full = solve_full(inst.problem, tight());
  CHECK(full.dual.converged == Converged::Full);
  REQUIRE(full.budget_duals.size() == inst.problem.budgets.size());
  for (const auto& g : inst.problem.budgets) {
    double mass = 0;
    for (int u : g.users) mass += inst.problem.p(u, 0) * full.x[u];
    CHECK(mass >= g.bound - 1e-6);
  }
  CHECK(full.x.minCoeff() >= 0.0);
  CHECK(full.x.maxCoeff() <= 1.0);
}

TEST_CASE("splitting with exact duals reproduces the full solution") {
  BinaryTreeInstance inst = gen_binary_tree(3, 202);
  FullSolve full = solve_full(inst.problem, tight());
  for (int k = 1; k <= inst.K; ++k) {
    SplitResult sr = split_solve(inst, full.budget_duals, k, tight());
    CHECK(std::abs(sr.objective - full.objective) <= 1e-5);
    CHECK((sr.x - full.x).cwiseAbs().maxCoeff() <= 1e-3);
  }
}

TEST_CASE("trusting a wrong dual moves the plan") {
  BinaryTreeInstance inst = gen_binary_tree(3, 202);
  FullSolve full = solve_full(inst.problem, tight());
  std::vector<double> mu = full.budget_duals;
  mu[0] += 0.5;  // distort the root pressure
  SplitResult sr = split_solve(inst, mu, inst.K, tight());
  CHECK((sr.x - full.x).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("modeled online time shrinks toward the leaves") {
  BinaryTreeInstance inst = gen_binary_tree(4, 7);
  FullSolve full = solve_full(inst.problem, tight());
  TimeModel tm;  // default power law has expo > 1, so splitting pays
  double prev = -1.0;
  for (int k = 1; k <= inst.K; ++k) {
    SplitResult sr = split_solve(inst, full.budget_duals, k, tight(), tm);
    double expect = std::ldexp(1.0, k) * tm.at(std::ldexp(1.0, inst.K - k));
    CHECK(sr.online_time_modeled == Catch::Approx(expect).epsilon(1e-12));
    if (prev >= 0) CHECK(sr.online_time_modeled < prev);
    prev = sr.online_time_modeled;
  }
}

TEST_CASE("split_solve validates its inputs") {
  BinaryTreeInstance inst = gen_binary_tree(2, 1);
  std::vector<double> mu(inst.problem.budgets.size(), 0.0);
  CHECK_THROWS_AS(split_solve(inst, mu, 0), BadParams);
  CHECK_THROWS_AS(split_solve(inst, mu, inst.K + 1), BadParams);
  mu.pop_back();
  CHECK_THROWS_AS(split_solve(inst, mu, 1), DimensionMismatch);
}

TEST_CASE("noiseless offline replicas make the curve collapse") {
  TreeOpts opts;
  opts.noise_sd = 0.0;
  BinaryTreeInstance inst = gen_binary_tree(2, 33, opts);
  auto rows = split_curve(inst, 2, 500, tight());
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.mse <= 1e-10);
    CHECK(row.online_time_modeled > 0.0);
  }
}

TEST_CASE("curve rows are deterministic apart from wall time") {
  BinaryTreeInstance inst = gen_binary_tree(2, 44);
  auto a = split_curve(inst, 3, 900);
  auto b = split_curve(inst, 3, 900);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].split_level == b[i].split_level);
    CHECK(a[i].mse == b[i].mse);
    CHECK(a[i].online_time_modeled == b[i].online_time_modeled);
  }
  CHECK_THROWS_AS(split_curve(inst, 0, 1), BadParams);
}
