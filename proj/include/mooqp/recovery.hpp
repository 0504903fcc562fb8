#pragma once

// Stage-2 conversion of shipped budget duals into per-user serving plans.
// Cap-constrained users get the sort-and-threshold closed form; everything
// else is a projection onto the user's local set.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/problem.hpp"
#include "mooqp/projection.hpp"
#include "mooqp/types.hpp"

namespace mooqp {

struct ServingPlan {
  int user = 0;
  Vector x;
  std::optional<double> nu;  // local coupling multiplier where the set has one
  std::optional<std::pair<int, int>> active_pattern;  // (t1, t2) band in sorted order
};

namespace detail {

// Items sorted by descending score, ties broken by item index.
inline std::vector<int> sort_by_score(const Vector& c) {
  std::vector<int> order(static_cast<std::size_t>(c.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return c[a] > c[b]; });
  return order;
}

inline ServingPlan slack_plan(const UserScores& s, const Vector& x) {
  int ones = 0, pos = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] >= 1.0 - 1e-12) ++ones;
    if (x[i] > 1e-12) ++pos;
  }
  ServingPlan plan;
  plan.user = s.user;
  plan.x = x;
  plan.nu = 0.0;
  plan.active_pattern = std::make_pair(ones, pos);
  return plan;
}

}  // namespace detail

/// Serving plan for a user whose local set is {0 <= x <= 1, sum x <= cap}.
/// The plan is piecewise in the score order: the top t1 items at 1, items
/// t1+1..t2 at (c - nu)/gamma, the rest at 0. The (t1, t2) band is found by a
/// single breakpoint sweep of the cap-residual function, and nu is then
/// solved exactly from the binding cap; an empty fractional band falls back
/// to the bisection primitive for nu.
inline ServingPlan recover_capped(const UserScores& scores, double cap) {
  if (!(cap > 0)) throw BadParams("recover_capped: cap must be positive");
  if (!(scores.gamma > 0)) throw BadParams("recover_capped: gamma must be positive");
  const Index m = scores.c.size();
  const Vector v = scores.c / scores.gamma;

  Vector x0 = v.cwiseMax(0.0).cwiseMin(1.0);
  if (x0.sum() <= cap + 1e-12) return detail::slack_plan(scores, x0);

  // Breakpoint sweep of g(lambda) = sum clip(v - lambda). g is piecewise
  // linear and non-increasing; the slope changes by +1 where a coordinate
  // hits 0 (lambda = v_i) and by -1 where it leaves 1 (lambda = v_i - 1).
  std::vector<std::pair<double, double>> events;
  events.reserve(2 * static_cast<std::size_t>(m));
  double slope = 0.0;
  for (Index i = 0; i < m; ++i) {
    if (v[i] - 1.0 > 0)
      events.emplace_back(v[i] - 1.0, -1.0);
    else if (v[i] > 0)
      slope -= 1.0;  // already fractional at lambda = 0
    if (v[i] > 0) events.emplace_back(v[i], +1.0);
  }
  std::sort(events.begin(), events.end());

  double lambda = 0.0;
  {
    double g = x0.sum();
    double prev = 0.0;
    bool found = false;
    for (const auto& [at, ds] : events) {
      double g_next = g + slope * (at - prev);
      if (g_next <= cap) {
        lambda = g > g_next ? prev + (g - cap) * (at - prev) / (g - g_next) : prev;
        found = true;
        break;
      }
      g = g_next;
      prev = at;
      slope += ds;
    }
    if (!found) throw NoValidPattern("recover_capped: cap residual never reached");
  }

  const std::vector<int> order = detail::sort_by_score(scores.c);
  int t1 = 0, t2 = 0;
  for (Index i = 0; i < m; ++i) {
    if (v[i] - lambda >= 1.0 - 1e-12) ++t1;
    if (v[i] - lambda > 1e-12) ++t2;
  }

  ServingPlan plan;
  plan.user = scores.user;
  plan.x = Vector::Zero(m);
  double nu;
  if (t2 > t1) {
    double band = 0.0;
    for (int j = t1; j < t2; ++j) band += scores.c[order[j]];
    nu = (scores.gamma * (t1 - cap) + band) / static_cast<double>(t2 - t1);
    for (int j = 0; j < t1; ++j) plan.x[order[j]] = 1.0;
    for (int j = t1; j < t2; ++j)
      plan.x[order[j]] = detail::clip01((scores.c[order[j]] - nu) / scores.gamma);
  } else {
    // Empty fractional band: nu is any value in a closed interval, so pin it
    // with the bisection primitive and keep x from the exact pattern.
    double lam = detail::cap_multiplier(v, detail::iota_items(m), cap);
    nu = scores.gamma * lam;
    for (int j = 0; j < t1; ++j) plan.x[order[j]] = 1.0;
  }
  plan.nu = std::max(0.0, nu);
  plan.active_pattern = std::make_pair(t1, t2);
  return plan;
}

/// Literal band search over all (t1, t2) pairs with the closed-form nu per
/// pair. Quadratic in the item count; used to cross-check the sweep.
inline ServingPlan recover_capped_enumerated(const UserScores& scores, double cap) {
  if (!(cap > 0)) throw BadParams("recover_capped_enumerated: cap must be positive");
  if (!(scores.gamma > 0)) throw BadParams("recover_capped_enumerated: gamma must be positive");
  const int m = static_cast<int>(scores.c.size());
  const double g = scores.gamma;
  const Vector v = scores.c / g;

  Vector x0 = v.cwiseMax(0.0).cwiseMin(1.0);
  if (x0.sum() <= cap + 1e-12) return detail::slack_plan(scores, x0);

  const std::vector<int> order = detail::sort_by_score(scores.c);
  auto cs = [&](int j) { return scores.c[order[j - 1]]; };  // 1-based sorted score

  const double tol = 1e-12;
  for (int t1 = 0; t1 < m; ++t1) {
    for (int t2 = t1 + 1; t2 <= m; ++t2) {
      double band = 0.0;
      for (int j = t1 + 1; j <= t2; ++j) band += cs(j);
      double nu = (g * (t1 - cap) + band) / static_cast<double>(t2 - t1);
      if (nu < -tol) continue;
      if (t1 >= 1 && (cs(t1) - nu) / g < 1.0 - tol) continue;
      if ((cs(t1 + 1) - nu) / g > 1.0 + tol) continue;
      if ((cs(t2) - nu) / g < -tol) continue;
      if (t2 < m && (cs(t2 + 1) - nu) / g > tol) continue;
      ServingPlan plan;
      plan.user = scores.user;
      plan.x = Vector::Zero(m);
      for (int j = 1; j <= t1; ++j) plan.x[order[j - 1]] = 1.0;
      for (int j = t1 + 1; j <= t2; ++j)
        plan.x[order[j - 1]] = detail::clip01((cs(j) - nu) / g);
      plan.nu = std::max(0.0, nu);
      plan.active_pattern = std::make_pair(t1, t2);
      return plan;
    }
  }

  // No pair passes: the cap binds exactly at an integer count of saturated
  // items, the same empty-band case the sweep resolves by bisection.
  int t = static_cast<int>(std::lround(cap));
  if (std::abs(cap - t) <= 1e-9 && t >= 1 && t <= m) {
    double lam = detail::cap_multiplier(v, detail::iota_items(m), cap);
    ServingPlan plan;
    plan.user = scores.user;
    plan.x = Vector::Zero(m);
    for (int j = 0; j < t; ++j) plan.x[order[j]] = 1.0;
    plan.nu = g * lam;
    plan.active_pattern = std::make_pair(t, t);
    return plan;
  }
  throw NoValidPattern("recover_capped_enumerated: no band satisfies the window conditions");
}

/// Serving plan for an arbitrary local set: the projection of c/gamma onto
/// the set. Scalar-coupled sets report their multiplier on the c scale,
/// signed so that x = clip((c - nu)/gamma) on the coupled items.
inline ServingPlan recover_general(const UserScores& scores, const LocalConstraint& local) {
  if (!(scores.gamma > 0)) throw BadParams("recover_general: gamma must be positive");
  const Index m = scores.c.size();
  const Vector v = scores.c / scores.gamma;
  std::vector<int> idx = local.items.empty() ? detail::iota_items(m) : local.items;
  for (int i : idx)
    if (i < 0 || i >= m) throw DimensionMismatch("recover_general: item index out of range");

  ServingPlan plan;
  plan.user = scores.user;
  Vector x = v.cwiseMax(0.0).cwiseMin(1.0);

  switch (local.kind) {
    case LocalConstraint::Kind::SumCap: {
      if (!(local.cap > 0)) throw BadParams("recover_general: cap must be positive");
      double mass = 0.0;
      for (int i : idx) mass += x[i];
      double lambda = 0.0;
      if (mass > local.cap + 1e-12) {
        lambda = detail::cap_multiplier(v, idx, local.cap);
        for (int i : idx) x[i] = detail::clip01(v[i] - lambda);
      }
      plan.nu = scores.gamma * lambda;
      break;
    }
    case LocalConstraint::Kind::SumFloor: {
      if (local.floor_bound > static_cast<double>(idx.size()) + 1e-12)
        throw InfeasibleLocalSet("recover_general: floor exceeds the box");
      double mass = 0.0;
      for (int i : idx) mass += x[i];
      double lambda = 0.0;
      if (mass < local.floor_bound - 1e-12) {
        lambda = detail::floor_multiplier(v, idx, local.floor_bound);
        for (int i : idx) x[i] = detail::clip01(v[i] + lambda);
      }
      plan.nu = -scores.gamma * lambda;
      break;
    }
    case LocalConstraint::Kind::SimplexEq: {
      if (idx.empty()) throw InfeasibleLocalSet("recover_general: empty simplex support");
      double lambda = detail::simplex_multiplier(v, idx, 1.0);
      for (int i : idx) x[i] = detail::clip01(v[i] - lambda);
      plan.nu = scores.gamma * lambda;
      break;
    }
    case LocalConstraint::Kind::GeneralLinear: {
      if (local.A.cols() != m || local.b.size() != local.A.rows())
        throw DimensionMismatch("recover_general: GeneralLinear shapes disagree");
      x = project_linear_region(v, local.A, local.b);
      plan.nu = std::nullopt;
      break;
    }
  }
  plan.x = x;
  return plan;
}

}  // namespace mooqp
