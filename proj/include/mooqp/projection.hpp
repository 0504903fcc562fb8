#pragma once

// Euclidean projections onto the per-user feasible sets. Every set here is a
// box intersected with at most one scalar coupling row, so each projection
// reduces to a one-dimensional search for the coupling multiplier; the
// general polyhedral case is delegated to the dual splitting solver at small
// scale.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mooqp/admm.hpp"
#include "mooqp/dual.hpp"
#include "mooqp/error.hpp"
#include "mooqp/types.hpp"

namespace mooqp {
namespace detail {

inline double clip01(double t) { return std::min(1.0, std::max(0.0, t)); }

inline std::vector<int> iota_items(Index m) {
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return idx;
}

inline double shifted_sum(const Vector& v, const std::vector<int>& idx, double lambda) {
  double s = 0.0;
  for (int i : idx) s += clip01(v[i] - lambda);
  return s;
}

// Smallest lambda >= 0 with sum_J clip(v - lambda) = cap, by plain bisection.
// Caller has already established that lambda = 0 overshoots the cap.
inline double cap_multiplier(const Vector& v, const std::vector<int>& idx, double cap) {
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (shifted_sum(v, idx, hi) > cap) {
    hi *= 2.0;
    if (++guard > 200) throw NumericalDivergence("cap_multiplier: bracket search failed");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shifted_sum(v, idx, mid) > cap)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Smallest lambda >= 0 with sum_J clip(v + lambda) = bound (floor side).
inline double floor_multiplier(const Vector& v, const std::vector<int>& idx, double bound) {
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (shifted_sum(v, idx, -hi) < bound) {
    hi *= 2.0;
    if (++guard > 200) throw NumericalDivergence("floor_multiplier: bracket search failed");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shifted_sum(v, idx, -mid) < bound)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Free-sign lambda with sum_J clip(v - lambda) = total.
inline double simplex_multiplier(const Vector& v, const std::vector<int>& idx, double total) {
  double lo = 0.0, hi = 0.0;
  for (int i : idx) {
    lo = std::min(lo, v[i] - 2.0);
    hi = std::max(hi, v[i] + 2.0);
  }
  lo -= 1.0;
  hi += 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shifted_sum(v, idx, mid) > total)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Projection of v onto {x : 0 <= x <= 1, sum x <= cap}.
inline Vector project_capped_box(const Vector& v, double cap) {
  if (!(cap > 0)) throw BadParams("project_capped_box: cap must be positive");
  Vector x = v.cwiseMax(0.0).cwiseMin(1.0);
  if (x.sum() <= cap) return x;
  double lambda = detail::cap_multiplier(v, detail::iota_items(v.size()), cap);
  for (Index i = 0; i < v.size(); ++i) x[i] = detail::clip01(v[i] - lambda);
  return x;
}

/// Projection of v onto {x : 0 <= x <= 1, sum x >= bound}.
inline Vector project_floored_box(const Vector& v, double bound) {
  Vector x = v.cwiseMax(0.0).cwiseMin(1.0);
  if (bound > static_cast<double>(v.size()) + 1e-12)
    throw InfeasibleLocalSet("project_floored_box: bound exceeds the box");
  if (x.sum() >= bound) return x;
  double lambda = detail::floor_multiplier(v, detail::iota_items(v.size()), bound);
  for (Index i = 0; i < v.size(); ++i) x[i] = detail::clip01(v[i] + lambda);
  return x;
}

/// Projection of v onto {x : 0 <= x <= 1, sum x = total}.
inline Vector project_sum_box(const Vector& v, double total) {
  if (total < 0 || total > static_cast<double>(v.size()) + 1e-12)
    throw InfeasibleLocalSet("project_sum_box: total incompatible with the box");
  double lambda = detail::simplex_multiplier(v, detail::iota_items(v.size()), total);
  Vector x(v.size());
  for (Index i = 0; i < v.size(); ++i) x[i] = detail::clip01(v[i] - lambda);
  return x;
}

/// Projection of v onto {x : A x <= b, 0 <= x <= 1}, computed by fully
/// dualizing the small projection QP and running the splitting solver tight.
inline Vector project_linear_region(const Vector& v, const Matrix& A, const Vector& b) {
  if (A.cols() != v.size() || A.rows() != b.size())
    throw DimensionMismatch("project_linear_region: shapes disagree");
  if (!detail::probe_general_linear(A, b))
    throw InfeasibleLocalSet("project_linear_region: region is empty within the box");
  std::vector<ConstraintRow> rows;
  rows.reserve(static_cast<std::size_t>(A.rows()));
  for (Index k = 0; k < A.rows(); ++k)
    rows.push_back({A.row(k).transpose(), Cmp::LessEq, b[k],
                    DualLabel{DualKind::LocalRow, 0, static_cast<int>(k)}});
  DualQP qp = assemble_rows(v, 1.0, rows, true);
  SolverConfig cfg;
  cfg.eps_abs = 1e-10;
  cfg.eps_rel = 1e-10;
  cfg.max_iters = 200000;
  DualSolution sol = solve(qp, cfg);
  Vector x = primal_from_dual_stationarity(qp, sol.z);
  return x.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace mooqp
