#pragma once

// Brute-force reference solvers. Everything here is written independently of
// the production solver paths on purpose: plain bisections, alternating
// projections, and exhaustive sign-pattern enumeration, each slow and simple
// enough to be checked by eye. Desk scale only.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/problem.hpp"
#include "mooqp/types.hpp"

namespace mooqp::oracle {

struct OracleSolution {
  Vector x;
  double objective = 0.0;
  std::vector<std::pair<std::string, double>> duals;  // budget and local multipliers
  std::vector<std::string> active_set;
  double kkt_residual = 0.0;
  double feasibility = 0.0;  // largest constraint violation
};

namespace detail {

inline Vector clip01(Vector v) {
  for (Index i = 0; i < v.size(); ++i) v[i] = std::min(1.0, std::max(0.0, v[i]));
  return v;
}

// sum over subset of clip(v - lambda, 0, 1)
inline double shifted_mass(const Vector& v, const std::vector<int>& idx, double lambda) {
  double s = 0.0;
  for (int i : idx) s += std::min(1.0, std::max(0.0, v[i] - lambda));
  return s;
}

// Projection onto {0<=x<=1, sum_{idx} x <= cap}: 200 plain bisection steps on
// the scalar multiplier. Returns the multiplier through *lambda_out.
inline Vector project_cap(const Vector& v, const std::vector<int>& idx, double cap,
                          double* lambda_out = nullptr) {
  Vector x = clip01(v);
  double mass = 0.0;
  for (int i : idx) mass += x[i];
  if (mass <= cap) {
    if (lambda_out) *lambda_out = 0.0;
    return x;
  }
  double lo = 0.0, hi = 1.0;
  while (shifted_mass(v, idx, hi) > cap) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shifted_mass(v, idx, mid) > cap)
      lo = mid;
    else
      hi = mid;
  }
  double lambda = 0.5 * (lo + hi);
  for (int i : idx) x[i] = std::min(1.0, std::max(0.0, v[i] - lambda));
  if (lambda_out) *lambda_out = lambda;
  return x;
}

// Projection onto {0<=x<=1, sum_{idx} x >= bound}: lift by a bisected lambda.
inline Vector project_floor(const Vector& v, const std::vector<int>& idx, double bound,
                            double* lambda_out = nullptr) {
  Vector x = clip01(v);
  double mass = 0.0;
  for (int i : idx) mass += x[i];
  if (mass >= bound) {
    if (lambda_out) *lambda_out = 0.0;
    return x;
  }
  double lo = 0.0, hi = 1.0;
  while (shifted_mass(v, idx, -hi) < bound) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shifted_mass(v, idx, -mid) < bound)
      lo = mid;
    else
      hi = mid;
  }
  double lambda = 0.5 * (lo + hi);
  for (int i : idx) x[i] = std::min(1.0, std::max(0.0, v[i] + lambda));
  if (lambda_out) *lambda_out = lambda;
  return x;
}

// Projection onto {0<=x<=1, sum_{idx} x = total}, multiplier free in sign.
inline Vector project_simplex_eq(const Vector& v, const std::vector<int>& idx, double total,
                                 double* lambda_out = nullptr) {
  double lo = -2.0, hi = 2.0;
  for (int i : idx) {
    lo = std::min(lo, v[i] - 2.0);
    hi = std::max(hi, v[i] + 2.0);
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shifted_mass(v, idx, mid) > total)
      lo = mid;
    else
      hi = mid;
  }
  double lambda = 0.5 * (lo + hi);
  Vector x = v;
  for (int i : idx) x[i] = std::min(1.0, std::max(0.0, v[i] - lambda));
  x = clip01(x);
  if (lambda_out) *lambda_out = lambda;
  return x;
}

// Dykstra's alternating projections onto box and halfspaces {a_k.x <= b_k}.
inline Vector project_polytope(const Vector& v, const Matrix& A, const Vector& b,
                               int max_sweeps = 50000, double tol = 1e-12) {
  const Index n = v.size();
  const Index m = A.rows();
  Vector x = v;
  Matrix corr = Matrix::Zero(m + 1, n);  // one correction per set, box last
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (Index k = 0; k <= m; ++k) {
      Vector y = x + corr.row(k).transpose();
      Vector z;
      if (k < m) {
        double viol = A.row(k).dot(y) - b[k];
        double nrm2 = A.row(k).squaredNorm();
        z = (viol > 0 && nrm2 > 0) ? Vector(y - (viol / nrm2) * A.row(k).transpose()) : y;
      } else {
        z = clip01(y);
      }
      corr.row(k) = (y - z).transpose();
      moved += (z - x).norm();
      x = z;
    }
    if (moved < tol) break;
  }
  return x;
}

inline std::vector<int> all_items(int M) {
  std::vector<int> idx(M);
  for (int i = 0; i < M; ++i) idx[i] = i;
  return idx;
}

// Projection of a full-length score vector onto one user's feasible set.
// Returns the local scalar multiplier when the set has one.
inline Vector project_local(const Vector& v, int M, const LocalConstraint* local,
                            double* lambda_out = nullptr) {
  if (lambda_out) *lambda_out = 0.0;
  if (!local) return clip01(v);
  std::vector<int> idx = local->items.empty() ? all_items(M) : local->items;
  switch (local->kind) {
    case LocalConstraint::Kind::SumCap:
      return project_cap(v, idx, local->cap, lambda_out);
    case LocalConstraint::Kind::SumFloor: {
      double lam = 0.0;
      Vector x = project_floor(v, idx, local->floor_bound, &lam);
      if (lambda_out) *lambda_out = -lam;  // signed like a cap multiplier
      return x;
    }
    case LocalConstraint::Kind::SimplexEq:
      return project_simplex_eq(v, idx, 1.0, lambda_out);
    case LocalConstraint::Kind::GeneralLinear:
      return project_polytope(v, local->A, local->b);
  }
  return clip01(v);
}

}  // namespace detail

/// Euclidean projection of v onto a local constraint set plus the box,
/// indices taken within v itself. Reference implementation for tests.
inline Vector project_dense(const Vector& v, const LocalConstraint& set) {
  if (v.size() > 50) throw TooLarge("project_dense: dimension above desk scale");
  if (set.kind == LocalConstraint::Kind::GeneralLinear &&
      !mooqp::detail::probe_general_linear(set.A, set.b))
    throw Infeasible("project_dense: empty feasible region");
  return detail::project_local(v, static_cast<int>(v.size()), &set);
}

/// Exact reference solve of one instance by dualizing only the global budgets
/// and driving each budget multiplier with plain bisection sweeps until
/// complementary slackness holds. Per-user solves are naive projections.
inline OracleSolution solve_primal_dense(const MooProblem& prob) {
  if (prob.dim() > 200) throw TooLarge("solve_primal_dense: instance above desk scale");
  const int m = static_cast<int>(prob.budgets.size());
  const Vector a = prob.a_flat();

  std::vector<Vector> w(m);
  std::vector<double> sign(m), bound(m);
  for (int j = 0; j < m; ++j) {
    w[j] = prob.budget_weights(prob.budgets[j]);
    sign[j] = prob.budgets[j].cmp == Cmp::LessEq ? -1.0 : 1.0;
    bound[j] = prob.budgets[j].bound;
  }

  std::vector<double> local_mult(prob.N, 0.0);
  auto primal_at = [&](const std::vector<double>& mu) {
    Vector c = a;
    for (int j = 0; j < m; ++j)
      if (mu[j] != 0.0) c += sign[j] * mu[j] * w[j];
    Vector x(prob.dim());
    for (int u = 0; u < prob.N; ++u) {
      Vector vu = c.segment(static_cast<Index>(u) * prob.M, prob.M) / prob.gamma;
      double lam = 0.0;
      Vector xu = detail::project_local(vu, prob.M, prob.local_for(u), &lam);
      x.segment(static_cast<Index>(u) * prob.M, prob.M) = xu;
      local_mult[u] = lam * prob.gamma;
    }
    return x;
  };

  // Slack of budget j at x, nonpositive when satisfied.
  auto slack = [&](int j, const Vector& x) {
    double usage = w[j].dot(x);
    return prob.budgets[j].cmp == Cmp::LessEq ? usage - bound[j] : bound[j] - usage;
  };

  std::vector<double> mu(m, 0.0);
  Vector x = primal_at(mu);
  for (int sweep = 0; sweep < 200 && m > 0; ++sweep) {
    double moved = 0.0;
    for (int j = 0; j < m; ++j) {
      auto viol_at = [&](double mj) {
        std::vector<double> probe = mu;
        probe[j] = mj;
        return slack(j, primal_at(probe));
      };
      double next = 0.0;
      if (viol_at(0.0) > 1e-15) {
        double lo = 0.0, hi = std::max(1.0, mu[j]);
        int guard = 0;
        while (viol_at(hi) > 0) {
          hi *= 2.0;
          if (++guard > 60) throw Error("oracle: budget multiplier search failed");
        }
        for (int it = 0; it < 200; ++it) {
          double mid = 0.5 * (lo + hi);
          if (viol_at(mid) > 0)
            lo = mid;
          else
            hi = mid;
        }
        next = 0.5 * (lo + hi);
      }
      moved += std::abs(next - mu[j]);
      mu[j] = next;
    }
    x = primal_at(mu);
    if (moved < 1e-13 * (1.0 + std::abs(mu[0]))) break;
  }
  x = primal_at(mu);

  OracleSolution sol;
  sol.x = x;
  sol.objective = prob.objective(x);
  for (int j = 0; j < m; ++j) sol.duals.emplace_back("budget[" + std::to_string(j) + "]", mu[j]);
  for (int u = 0; u < prob.N; ++u)
    if (prob.local_for(u))
      sol.duals.emplace_back("local[" + std::to_string(u) + "]", local_mult[u]);

  // Feasibility and complementarity bookkeeping.
  double feas = 0.0;
  for (int j = 0; j < m; ++j) {
    double s = slack(j, x);
    feas = std::max(feas, s);
    if (s > -1e-9 || mu[j] > 1e-9) sol.active_set.push_back("budget[" + std::to_string(j) + "]");
  }
  for (Index i = 0; i < x.size(); ++i)
    feas = std::max(feas, std::max(x[i] - 1.0, -x[i]));
  for (const auto& l : prob.locals) {
    Vector xu = x.segment(static_cast<Index>(l.user) * prob.M, prob.M);
    std::vector<int> idx = l.items.empty() ? detail::all_items(prob.M) : l.items;
    double mass = 0.0;
    for (int i : idx) mass += xu[i];
    switch (l.kind) {
      case LocalConstraint::Kind::SumCap:
        feas = std::max(feas, mass - l.cap);
        break;
      case LocalConstraint::Kind::SumFloor:
        feas = std::max(feas, l.floor_bound - mass);
        break;
      case LocalConstraint::Kind::SimplexEq:
        feas = std::max(feas, std::abs(mass - 1.0));
        break;
      case LocalConstraint::Kind::GeneralLinear:
        for (Index k = 0; k < l.A.rows(); ++k)
          feas = std::max(feas, l.A.row(k).dot(xu) - l.b[k]);
        break;
    }
  }
  sol.feasibility = feas;

  // Stationarity through complementary slackness of the budget multipliers;
  // the per-user pieces are projections, so their own optimality is exact up
  // to bisection tolerance and gets verified by probe tests.
  double comp = 0.0;
  for (int j = 0; j < m; ++j) comp = std::max(comp, std::abs(mu[j] * slack(j, x)));
  sol.kkt_residual = std::max(comp, std::max(feas, 0.0));
  return sol;
}

/// Exhaustive sign-pattern reference for min (1/2) z'Bz - p.z over z >= 0.
/// For every support S it solves B_SS z_S = p_S and keeps KKT-valid patterns.
inline Vector nnqp_enumerate(const Matrix& B, const Vector& p) {
  const int d = static_cast<int>(p.size());
  if (d > 22) throw TooLarge("nnqp_enumerate: too many sign patterns");
  Vector best = Vector::Zero(d);
  double best_obj = 0.0;
  bool found = false;
  for (std::uint64_t mask = 0; mask < (1ull << d); ++mask) {
    std::vector<int> sup;
    for (int i = 0; i < d; ++i)
      if (mask & (1ull << i)) sup.push_back(i);
    Vector z = Vector::Zero(d);
    if (!sup.empty()) {
      Matrix Bs(sup.size(), sup.size());
      Vector ps(sup.size());
      for (std::size_t r0 = 0; r0 < sup.size(); ++r0) {
        ps[r0] = p[sup[r0]];
        for (std::size_t c0 = 0; c0 < sup.size(); ++c0) Bs(r0, c0) = B(sup[r0], sup[c0]);
      }
      Vector zs = Bs.fullPivLu().solve(ps);
      if ((Bs * zs - ps).lpNorm<Eigen::Infinity>() > 1e-8) continue;
      bool nonneg = true;
      for (Index i = 0; i < zs.size(); ++i)
        if (zs[i] < -1e-12) nonneg = false;
      if (!nonneg) continue;
      for (std::size_t i0 = 0; i0 < sup.size(); ++i0) z[sup[i0]] = std::max(0.0, zs[i0]);
    }
    Vector grad = B * z - p;
    bool valid = true;
    for (int i = 0; i < d; ++i)
      if (!(mask & (1ull << i)) && grad[i] < -1e-9) valid = false;
    if (!valid) continue;
    double obj = 0.5 * z.dot(B * z) - p.dot(z);
    if (!found || obj < best_obj) {
      best = z;
      best_obj = obj;
      found = true;
    }
  }
  if (!found) throw NoValidPattern("nnqp_enumerate: no KKT-valid sign pattern");
  return best;
}

}  // namespace mooqp::oracle
