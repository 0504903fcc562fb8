#pragma once

#include <mooqp/problem.hpp>

namespace fixtures {

// Three users, two items, one complaint cap, full-allocation equality on
// every user. Dual dimension 1 + 6 + 12 = 19, small enough for brute force.
inline mooqp::MooProblem benchmark_3x2() {
  using namespace mooqp;
  MooProblem prob;
  prob.N = 3;
  prob.M = 2;
  prob.gamma = 1.2;
  prob.p = Matrix(3, 2);
  prob.p << 0.62, 0.31, 0.45, 0.78, 0.18, 0.55;
  prob.r = Matrix(3, 2);
  prob.r << 0.21, 0.66, 0.35, 0.12, 0.59, 0.44;
  prob.q = Matrix(3, 2);
  prob.q << 0.40, 0.15, 0.22, 0.50, 0.33, 0.08;
  GlobalBudget g;
  g.ref = GlobalBudget::Ref::R;
  g.cmp = Cmp::LessEq;
  g.bound = 0.8;
  prob.budgets.push_back(g);
  for (int u = 0; u < 3; ++u) {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SimplexEq;
    lc.user = u;
    prob.locals.push_back(lc);
  }
  return prob;
}

}  // namespace fixtures
