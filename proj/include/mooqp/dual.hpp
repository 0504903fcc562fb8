#pragma once

// Dual QP assembly. Every linear constraint is oriented as w.x >= bound
// before dualization (a <= row flips sign), equalities become a +/- pair, and
// the box contributes one lower and one upper dual per coordinate. With that
// orientation the only dual constraint left is z >= 0, and the dual objective
// is (1/2) z'Bz - p~.z with B = A^'A^/gamma, p~ = s~ - A^'a/gamma.

#include <string>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/problem.hpp"
#include "mooqp/types.hpp"

namespace mooqp {

enum class DualKind { Budget, EqUpper, EqLower, BoxLower, BoxUpper, LocalRow };

struct DualLabel {
  DualKind kind = DualKind::Budget;
  int index = -1;  // budget id, user id, or caller-chosen row id
  int item = -1;   // item for box duals when known
};

inline std::string to_string(const DualLabel& l) {
  auto pos = [&] {
    if (l.item < 0) return "[" + std::to_string(l.index) + "]";
    return "[" + std::to_string(l.index) + "," + std::to_string(l.item) + "]";
  };
  switch (l.kind) {
    case DualKind::Budget:
      return "mu" + pos();
    case DualKind::EqUpper:
      return "nu+" + pos();
    case DualKind::EqLower:
      return "nu-" + pos();
    case DualKind::BoxLower:
      return "xi" + pos();
    case DualKind::BoxUpper:
      return "eta" + pos();
    case DualKind::LocalRow:
      return "row" + pos();
  }
  return "?" + pos();
}

/// The nonnegative dual QP, min (1/2) z'Bz - p~.z over z >= 0. B itself is
/// kept in Gram form: dense_B() materializes it at desk scale, apply_B() is
/// the matrix-free product used beyond that.
struct DualQP {
  SparseMatrix A_hat;  // primal dim x dual dim, one signed column per dual
  Vector s_tilde;      // constant terms of the oriented constraints
  Vector p_tilde;      // s_tilde - A_hat'a/gamma
  Vector a;            // primal linear coefficient
  double gamma = 1.0;
  std::vector<DualLabel> index_map;

  Index dim() const { return p_tilde.size(); }

  Vector apply_B(const Vector& z) const {
    if (z.size() != dim()) throw DimensionMismatch("apply_B: dual vector size");
    return A_hat.transpose() * (A_hat * z) / gamma;
  }

  Matrix dense_B() const {
    Matrix ah = Matrix(A_hat);
    return ah.transpose() * ah / gamma;
  }

  double dual_objective(const Vector& z) const {
    return 0.5 * z.dot(apply_B(z)) - p_tilde.dot(z);
  }

  // Strong duality bookkeeping: the primal optimum equals the negated dual
  // optimum minus the constant |a|^2/(2 gamma) dropped during dualization.
  double primal_value_from_dual_min(double dual_min) const {
    return -dual_min - a.squaredNorm() / (2.0 * gamma);
  }

  std::vector<int> budget_coords() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < index_map.size(); ++k)
      if (index_map[k].kind == DualKind::Budget) out.push_back(static_cast<int>(k));
    return out;
  }
};

/// One constraint row destined for dualization, in its natural orientation.
struct ConstraintRow {
  Vector w;
  Cmp cmp = Cmp::LessEq;
  double bound = 0.0;
  DualLabel label;
};

/// Generic assembly: dualizes the given rows plus (optionally) the box over
/// the full coordinate range. Column order is rows first, then box lower,
/// then box upper.
inline DualQP assemble_rows(const Vector& a, double gamma, const std::vector<ConstraintRow>& rows,
                            bool include_box = true) {
  if (!(gamma > 0)) throw BadParams("assemble_rows: gamma must be positive");
  const Index n = a.size();
  const Index d = static_cast<Index>(rows.size()) + (include_box ? 2 * n : 0);

  DualQP qp;
  qp.a = a;
  qp.gamma = gamma;
  qp.s_tilde = Vector::Zero(d);
  qp.index_map.resize(static_cast<std::size_t>(d));

  std::vector<Eigen::Triplet<double>> trips;
  Index col = 0;
  for (const auto& row : rows) {
    if (row.w.size() != n) throw DimensionMismatch("assemble_rows: row length");
    double sign = row.cmp == Cmp::LessEq ? -1.0 : 1.0;
    for (Index i = 0; i < n; ++i)
      if (row.w[i] != 0.0) trips.emplace_back(i, col, sign * row.w[i]);
    qp.s_tilde[col] = sign * row.bound;
    qp.index_map[static_cast<std::size_t>(col)] = row.label;
    ++col;
  }
  if (include_box) {
    for (Index i = 0; i < n; ++i) {  // x_i >= 0
      trips.emplace_back(i, col, 1.0);
      qp.s_tilde[col] = 0.0;
      qp.index_map[static_cast<std::size_t>(col)] = {DualKind::BoxLower, static_cast<int>(i), -1};
      ++col;
    }
    for (Index i = 0; i < n; ++i) {  // x_i <= 1
      trips.emplace_back(i, col, -1.0);
      qp.s_tilde[col] = -1.0;
      qp.index_map[static_cast<std::size_t>(col)] = {DualKind::BoxUpper, static_cast<int>(i), -1};
      ++col;
    }
  }
  qp.A_hat.resize(n, d);
  qp.A_hat.setFromTriplets(trips.begin(), trips.end());
  qp.p_tilde = qp.s_tilde - qp.A_hat.transpose() * a / gamma;
  return qp;
}

/// Full dualization of an instance in the budgets + per-user simplex + box
/// layout. Column order: budgets, then the simplex pairs (upper block, lower
/// block), then box lower, then box upper. Users without a local constraint
/// simply contribute no simplex pair; any other local kind is not dualized
/// here and is rejected.
inline DualQP assemble_dual(const MooProblem& prob) {
  for (const auto& l : prob.locals)
    if (l.kind != LocalConstraint::Kind::SimplexEq)
      throw UnsupportedLayout("assemble_dual: only simplex equality locals are dualized here");
  if (!(prob.gamma > 0)) throw BadParams("assemble_dual: gamma must be positive");

  const Index n = prob.dim();
  const int m = static_cast<int>(prob.budgets.size());
  std::vector<int> eq_users;
  for (int u = 0; u < prob.N; ++u)
    if (prob.local_for(u)) eq_users.push_back(u);
  const Index ne = static_cast<Index>(eq_users.size());
  const Index d = m + 2 * ne + 2 * n;

  DualQP qp;
  qp.a = prob.a_flat();
  qp.gamma = prob.gamma;
  qp.s_tilde = Vector::Zero(d);
  qp.index_map.resize(static_cast<std::size_t>(d));

  std::vector<Eigen::Triplet<double>> trips;
  Index col = 0;
  for (int j = 0; j < m; ++j) {
    Vector w = prob.budget_weights(prob.budgets[j]);
    double sign = prob.budgets[j].cmp == Cmp::LessEq ? -1.0 : 1.0;
    for (Index i = 0; i < n; ++i)
      if (w[i] != 0.0) trips.emplace_back(i, col, sign * w[i]);
    qp.s_tilde[col] = sign * prob.budgets[j].bound;
    qp.index_map[static_cast<std::size_t>(col)] = {DualKind::Budget, j, -1};
    ++col;
  }
  auto items_of = [&](int u) {
    const LocalConstraint* l = prob.local_for(u);
    if (l && !l->items.empty()) return l->items;
    std::vector<int> idx(prob.M);
    for (int i = 0; i < prob.M; ++i) idx[i] = i;
    return idx;
  };
  for (int u : eq_users) {  // sum_i x_ui <= 1 side
    for (int i : items_of(u)) trips.emplace_back(static_cast<Index>(u) * prob.M + i, col, -1.0);
    qp.s_tilde[col] = -1.0;
    qp.index_map[static_cast<std::size_t>(col)] = {DualKind::EqUpper, u, -1};
    ++col;
  }
  for (int u : eq_users) {  // sum_i x_ui >= 1 side
    for (int i : items_of(u)) trips.emplace_back(static_cast<Index>(u) * prob.M + i, col, 1.0);
    qp.s_tilde[col] = 1.0;
    qp.index_map[static_cast<std::size_t>(col)] = {DualKind::EqLower, u, -1};
    ++col;
  }
  for (int u = 0; u < prob.N; ++u)
    for (int i = 0; i < prob.M; ++i) {  // x >= 0
      trips.emplace_back(static_cast<Index>(u) * prob.M + i, col, 1.0);
      qp.index_map[static_cast<std::size_t>(col)] = {DualKind::BoxLower, u, i};
      ++col;
    }
  for (int u = 0; u < prob.N; ++u)
    for (int i = 0; i < prob.M; ++i) {  // x <= 1
      trips.emplace_back(static_cast<Index>(u) * prob.M + i, col, -1.0);
      qp.s_tilde[col] = -1.0;
      qp.index_map[static_cast<std::size_t>(col)] = {DualKind::BoxUpper, u, i};
      ++col;
    }
  qp.A_hat.resize(n, d);
  qp.A_hat.setFromTriplets(trips.begin(), trips.end());
  qp.p_tilde = qp.s_tilde - qp.A_hat.transpose() * qp.a / prob.gamma;
  return qp;
}

/// Stationarity map of the fully dualized problem: x = (a + A^ z)/gamma.
/// Exact (no clipping) when z solves the dual with every constraint dualized.
inline Vector primal_from_dual_stationarity(const DualQP& qp, const Vector& z) {
  if (z.size() != qp.dim()) throw DimensionMismatch("primal_from_dual_stationarity: dual size");
  return (qp.a + qp.A_hat * z) / qp.gamma;
}

inline Vector primal_from_dual_stationarity(const MooProblem& prob, const Vector& z) {
  return primal_from_dual_stationarity(assemble_dual(prob), z);
}

/// Rows for dualizing EVERYTHING in an instance: budgets, then each user's
/// local constraint expanded to linear rows. Pair with include_box=true to
/// get a dual whose stationarity point is the exact primal optimum.
inline std::vector<ConstraintRow> all_constraint_rows(const MooProblem& prob) {
  std::vector<ConstraintRow> rows;
  const Index n = prob.dim();
  for (int j = 0; j < static_cast<int>(prob.budgets.size()); ++j) {
    rows.push_back({prob.budget_weights(prob.budgets[j]), prob.budgets[j].cmp,
                    prob.budgets[j].bound,
                    DualLabel{DualKind::Budget, j, -1}});
  }
  auto indicator = [&](int u, const std::vector<int>& items) {
    Vector w = Vector::Zero(n);
    if (items.empty()) {
      for (int i = 0; i < prob.M; ++i) w[static_cast<Index>(u) * prob.M + i] = 1.0;
    } else {
      for (int i : items) w[static_cast<Index>(u) * prob.M + i] = 1.0;
    }
    return w;
  };
  for (const auto& l : prob.locals) {
    switch (l.kind) {
      case LocalConstraint::Kind::SumCap:
        rows.push_back({indicator(l.user, l.items), Cmp::LessEq, l.cap,
                        DualLabel{DualKind::LocalRow, l.user, 0}});
        break;
      case LocalConstraint::Kind::SumFloor:
        rows.push_back({indicator(l.user, l.items), Cmp::GreaterEq, l.floor_bound,
                        DualLabel{DualKind::LocalRow, l.user, 0}});
        break;
      case LocalConstraint::Kind::SimplexEq:
        rows.push_back({indicator(l.user, l.items), Cmp::LessEq, 1.0,
                        DualLabel{DualKind::EqUpper, l.user, -1}});
        rows.push_back({indicator(l.user, l.items), Cmp::GreaterEq, 1.0,
                        DualLabel{DualKind::EqLower, l.user, -1}});
        break;
      case LocalConstraint::Kind::GeneralLinear:
        for (Index k = 0; k < l.A.rows(); ++k) {
          Vector w = Vector::Zero(n);
          for (int i = 0; i < prob.M; ++i) w[static_cast<Index>(l.user) * prob.M + i] = l.A(k, i);
          rows.push_back({std::move(w), Cmp::LessEq, l.b[k],
                          DualLabel{DualKind::LocalRow, l.user, static_cast<int>(k)}});
        }
        break;
    }
  }
  return rows;
}

}  // namespace mooqp
