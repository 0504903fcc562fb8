#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/types.hpp"

namespace mooqp {

/// A population-level linear budget over the full plan, w.x (cmp) bound.
/// Weights either reference one of the instance matrices (r or p) or are
/// given inline; an optional user mask zeroes every row outside it, which is
/// how nested subset constraints are expressed without storing dense zeros.
struct GlobalBudget {
  enum class Ref { R, P, Inline };
  Ref ref = Ref::R;
  Matrix weights;           // used when ref == Inline, N x M
  std::vector<int> users;   // empty = all users
  Cmp cmp = Cmp::LessEq;
  double bound = 0.0;
};

/// Per-user feasible set on top of the implicit box [0,1]^M.
struct LocalConstraint {
  enum class Kind { SumCap, SumFloor, SimplexEq, GeneralLinear };
  Kind kind = Kind::SumCap;
  int user = 0;
  std::vector<int> items;  // SumCap/SumFloor subset; empty = all items
  double cap = 0.0;        // SumCap bound K_u
  double floor_bound = 0.0;  // SumFloor bound
  Matrix A;                // GeneralLinear rows, over the user's M items
  Vector b;                // A x <= b
};

/// One problem instance: minimize -a.x + (gamma/2)|x|^2 over the box with
/// the stated budgets and per-user sets, where a = p + gamma q. Vectors over
/// the plan are flattened user-major: coordinate u*M + i is (user u, item i).
struct MooProblem {
  int N = 0;
  int M = 0;
  double gamma = 1.0;
  Matrix p, r, q;  // N x M
  std::vector<GlobalBudget> budgets;
  std::vector<LocalConstraint> locals;

  Index dim() const { return static_cast<Index>(N) * M; }

  // a = p + gamma q, computed on demand so it can never go stale.
  Vector a_flat() const {
    Vector a(dim());
    for (int u = 0; u < N; ++u)
      for (int i = 0; i < M; ++i) a[u * M + i] = p(u, i) + gamma * q(u, i);
    return a;
  }

  Vector flatten(const Matrix& m) const {
    Vector v(dim());
    for (int u = 0; u < N; ++u)
      for (int i = 0; i < M; ++i) v[u * M + i] = m(u, i);
    return v;
  }

  // Effective weight vector of one budget, flattened with the user mask applied.
  Vector budget_weights(const GlobalBudget& g) const {
    const Matrix& src = g.ref == GlobalBudget::Ref::R   ? r
                        : g.ref == GlobalBudget::Ref::P ? p
                                                        : g.weights;
    Vector w = Vector::Zero(dim());
    if (g.users.empty()) {
      for (int u = 0; u < N; ++u)
        for (int i = 0; i < M; ++i) w[u * M + i] = src(u, i);
    } else {
      for (int u : g.users)
        for (int i = 0; i < M; ++i) w[u * M + i] = src(u, i);
    }
    return w;
  }

  // The local constraint attached to a user, if any. validate() enforces at
  // most one per user.
  const LocalConstraint* local_for(int user) const {
    for (const auto& l : locals)
      if (l.user == user) return &l;
    return nullptr;
  }

  double objective(const Vector& x) const {
    Vector a = a_flat();
    return -a.dot(x) + 0.5 * gamma * x.squaredNorm();
  }
};

struct Violation {
  std::string message;
  int user = -1;
  int item = -1;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

// Cheap feasibility probe for {A x <= b} intersected with the box: alternating
// projections onto the box and each halfspace. On an empty intersection the
// iteration settles into a cycle with positive residual, which is what we test.
inline bool probe_general_linear(const Matrix& A, const Vector& b, int iters = 2000,
                                 double tol = 1e-7) {
  Vector x = Vector::Constant(A.cols(), 0.5);
  for (int it = 0; it < iters; ++it) {
    for (Index k = 0; k < A.rows(); ++k) {
      double viol = A.row(k).dot(x) - b[k];
      double nrm2 = A.row(k).squaredNorm();
      if (viol > 0 && nrm2 > 0) x -= (viol / nrm2) * A.row(k).transpose();
    }
    x = x.cwiseMax(0.0).cwiseMin(1.0);
  }
  double worst = 0.0;
  for (Index k = 0; k < A.rows(); ++k) worst = std::max(worst, A.row(k).dot(x) - b[k]);
  return worst <= tol;
}

}  // namespace detail

inline ValidationReport validate(const MooProblem& prob) {
  ValidationReport rep;
  auto add = [&](std::string msg, int u = -1, int i = -1) {
    rep.violations.push_back({std::move(msg), u, i});
  };

  if (prob.N < 1 || prob.M < 1) add("N and M must be at least 1");
  if (!(prob.gamma > 0)) add("gamma must be positive");

  auto check_matrix = [&](const Matrix& m, const char* name) {
    if (m.rows() != prob.N || m.cols() != prob.M) {
      add(std::string(name) + " has wrong shape");
      return;
    }
    for (int u = 0; u < prob.N; ++u)
      for (int i = 0; i < prob.M; ++i) {
        double v = m(u, i);
        if (!(v >= 0.0 && v <= 1.0))
          add(std::string(name) + " out of [0,1] at (" + std::to_string(u) + "," +
                  std::to_string(i) + ")",
              u, i);
      }
  };
  check_matrix(prob.p, "p");
  check_matrix(prob.r, "r");
  check_matrix(prob.q, "q");

  for (std::size_t j = 0; j < prob.budgets.size(); ++j) {
    const auto& g = prob.budgets[j];
    std::string tag = "budget[" + std::to_string(j) + "]";
    if (!std::isfinite(g.bound)) add(tag + " bound not finite");
    if (g.ref == GlobalBudget::Ref::Inline &&
        (g.weights.rows() != prob.N || g.weights.cols() != prob.M))
      add(tag + " inline weights have wrong shape");
    for (int u : g.users)
      if (u < 0 || u >= prob.N) add(tag + " user id out of range", u);
  }

  std::vector<int> seen(static_cast<std::size_t>(std::max(prob.N, 0)), 0);
  for (const auto& l : prob.locals) {
    if (l.user < 0 || l.user >= prob.N) {
      add("local constraint user id out of range", l.user);
      continue;
    }
    if (++seen[l.user] > 1) add("more than one local constraint for user", l.user);
    for (int i : l.items)
      if (i < 0 || i >= prob.M) add("local constraint item out of range", l.user, i);
    switch (l.kind) {
      case LocalConstraint::Kind::SumCap:
        if (!(l.cap > 0)) add("SumCap requires a positive cap", l.user);
        break;
      case LocalConstraint::Kind::SumFloor: {
        double width = static_cast<double>(l.items.empty() ? prob.M : l.items.size());
        if (l.floor_bound < 0 || l.floor_bound > width)
          add("SumFloor bound incompatible with the box", l.user);
        break;
      }
      case LocalConstraint::Kind::SimplexEq:
        break;
      case LocalConstraint::Kind::GeneralLinear:
        if (l.A.cols() != prob.M || l.b.size() != l.A.rows()) {
          add("GeneralLinear shape mismatch", l.user);
        } else if (!detail::probe_general_linear(l.A, l.b)) {
          add("GeneralLinear region is infeasible within the box", l.user);
        }
        break;
    }
  }
  return rep;
}

/// Per-user stage-2 scores: c_u = a_u adjusted by the shipped budget duals.
/// A LessEq budget subtracts mu w, a GreaterEq budget adds it.
struct UserScores {
  int user = 0;
  Vector c;  // length M
  double gamma = 1.0;
};

inline std::vector<UserScores> user_scores(const MooProblem& prob, const std::vector<double>& mu) {
  if (mu.size() != prob.budgets.size())
    throw DimensionMismatch("user_scores: one dual per budget required");
  Vector c = prob.a_flat();
  for (std::size_t j = 0; j < prob.budgets.size(); ++j) {
    double sign = prob.budgets[j].cmp == Cmp::LessEq ? -1.0 : 1.0;
    if (mu[j] != 0.0) c += sign * mu[j] * prob.budget_weights(prob.budgets[j]);
  }
  std::vector<UserScores> out;
  out.reserve(prob.N);
  for (int u = 0; u < prob.N; ++u)
    out.push_back({u, c.segment(static_cast<Index>(u) * prob.M, prob.M), prob.gamma});
  return out;
}

}  // namespace mooqp
