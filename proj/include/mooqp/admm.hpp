#pragma once

// Operator-splitting solver for min (1/2) z'Bz - p~.z over z >= 0. Each
// iteration takes a prox step on the quadratic, projects onto the orthant,
// and corrects the running splitting offset:
//   z_half = (B + rho I)^{-1} (p~ + rho (z - z~))
//   z_new  = (z_half + z~)_+
//   z~     = z~ + z_half - z_new
// The prox system is factorized once (dense Cholesky) at desk scale and
// solved matrix-free by conjugate gradients beyond that, using
// B v = A^'(A^ v)/gamma without forming B.

#include <cmath>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "mooqp/dual.hpp"
#include "mooqp/error.hpp"
#include "mooqp/types.hpp"
#include "mooqp/util.hpp"

namespace mooqp {

enum class LinearSolver { Auto, Direct, Iterative };
enum class Converged { Full, ApproxMu, MaxIters };

struct IterRecord {
  int iter = 0;
  double r_norm = 0.0;
  double s_norm = 0.0;
};

struct SolverConfig {
  double rho = 1.0;
  double eps_abs = 1e-6;
  double eps_rel = 1e-4;
  int max_iters = 100000;
  // Early stop on the budget-dual block: relative change below this for 10
  // consecutive iterations ends the solve. Off by default; it trades
  // tail accuracy for speed and is only safe when mu is all the caller needs.
  std::optional<double> approx_mu_tolerance;
  LinearSolver linear_solver = LinearSolver::Auto;
  int dense_limit = 4000;   // Auto picks the factorized path up to this dim
  double cg_tol = 1e-10;    // relative residual for the matrix-free path
  int diag_every = 0;       // emit a diagnostics CSV record every k iters
  std::ostream* diag_stream = nullptr;
  std::vector<IterRecord>* history = nullptr;  // optional per-iteration trace
};

struct DualSolution {
  Vector z;
  std::vector<double> mu_block;  // budget coordinates of z, in budget order
  int iterations = 0;
  double r_norm = 0.0;
  double s_norm = 0.0;
  Converged converged = Converged::Full;
};

/// Norms of the splitting residuals r = z_half - z_new, s = -rho(z_new - z_prev).
inline std::pair<double, double> residuals(const Vector& z_half, const Vector& z_new,
                                           const Vector& z_prev, double rho) {
  if (z_half.size() != z_new.size() || z_new.size() != z_prev.size())
    throw DimensionMismatch("residuals: vector sizes differ");
  double r = (z_half - z_new).norm();
  double s = (rho * (z_new - z_prev)).norm();
  return {r, s};
}

/// One prox evaluation, argmin_x (1/2)x'Bx - p~.x + (rho/2)|x - v|^2, with the
/// factorization of (B + rho I) cached across calls that pass the same (B, rho).
inline Vector prox_quadratic(const Matrix& B, const Vector& p_tilde, double rho,
                             const Vector& v) {
  if (!(rho > 0)) throw BadParams("prox_quadratic: rho must be positive");
  if (B.rows() != B.cols() || B.rows() != p_tilde.size() || v.size() != p_tilde.size())
    throw DimensionMismatch("prox_quadratic: shapes disagree");
  thread_local Matrix cached_B;
  thread_local double cached_rho = -1.0;
  thread_local Eigen::LLT<Matrix> llt;
  bool hit = cached_rho == rho && cached_B.rows() == B.rows() &&
             (cached_B.array() == B.array()).all();
  if (!hit) {
    Matrix S = B;
    S.diagonal().array() += rho;
    llt.compute(S);
    if (llt.info() != Eigen::Success)
      throw SingularSystem("prox_quadratic: factorization of B + rho I failed");
    cached_B = B;
    cached_rho = rho;
  }
  return llt.solve(p_tilde + rho * v);
}

/// The prox engine behind solve(): factorize once when dense, otherwise run
/// warm-started conjugate gradients against the Gram-form operator.
class ProxOperator {
 public:
  ProxOperator(const DualQP& qp, double rho, LinearSolver mode, int dense_limit, double cg_tol)
      : qp_(qp), rho_(rho), cg_tol_(cg_tol) {
    direct_ = mode == LinearSolver::Direct ||
              (mode == LinearSolver::Auto && qp.dim() <= dense_limit);
    if (direct_) {
      Matrix S = qp.dense_B();
      S.diagonal().array() += rho;
      llt_.compute(S);
      if (llt_.info() != Eigen::Success)
        throw SingularSystem("prox: factorization of B + rho I failed");
    } else {
      warm_ = Vector::Zero(qp.dim());
    }
  }

  bool direct() const { return direct_; }

  Vector step(const Vector& v) const {
    Vector rhs = qp_.p_tilde + rho_ * v;
    if (direct_) return llt_.solve(rhs);
    return cg(rhs);
  }

 private:
  Vector cg(const Vector& b) const {
    Vector x = warm_;
    Vector r = b - op(x);
    Vector p = r;
    double rs = r.squaredNorm();
    double stop = cg_tol_ * b.norm();
    Index cap = std::min<Index>(qp_.dim(), 5000);
    for (Index it = 0; it < cap && std::sqrt(rs) > stop; ++it) {
      Vector Ap = op(p);
      double denom = p.dot(Ap);
      if (!(denom > 0)) break;  // numerically flat direction; accept iterate
      double alpha = rs / denom;
      x += alpha * p;
      r -= alpha * Ap;
      double rs_new = r.squaredNorm();
      p = r + (rs_new / rs) * p;
      rs = rs_new;
    }
    warm_ = x;
    return x;
  }

  Vector op(const Vector& v) const { return qp_.apply_B(v) + rho_ * v; }

  const DualQP& qp_;
  double rho_;
  double cg_tol_;
  bool direct_ = true;
  Eigen::LLT<Matrix> llt_;
  mutable Vector warm_;
};

namespace detail {

inline std::vector<double> gather(const Vector& z, const std::vector<int>& coords) {
  std::vector<double> out(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) out[k] = z[coords[k]];
  return out;
}

}  // namespace detail

inline DualSolution solve(const DualQP& qp, const SolverConfig& cfg = {}) {
  if (!(cfg.rho > 0) || !(cfg.eps_abs > 0) || !(cfg.eps_rel > 0) || cfg.max_iters < 1)
    throw BadParams("solve: rho and tolerances must be positive, max_iters >= 1");
  if (cfg.approx_mu_tolerance && !(*cfg.approx_mu_tolerance > 0))
    throw BadParams("solve: approx_mu_tolerance must be positive when set");

  const Index d = qp.dim();
  DualSolution sol;
  if (d == 0) {
    sol.z = Vector();
    return sol;
  }

  ProxOperator prox(qp, cfg.rho, cfg.linear_solver, cfg.dense_limit, cfg.cg_tol);
  const std::vector<int> mu_coords = qp.budget_coords();
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  if (cfg.diag_stream && cfg.diag_every > 0) {
    *cfg.diag_stream << "iter,r_norm,s_norm";
    for (int c : mu_coords) *cfg.diag_stream << "," << to_string(qp.index_map[c]);
    *cfg.diag_stream << "\n";
  }

  Vector z = Vector::Zero(d);
  Vector zt = Vector::Zero(d);
  std::vector<double> mu_prev = detail::gather(z, mu_coords);
  int mu_streak = 0;
  sol.converged = Converged::MaxIters;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    Vector z_half = prox.step(z - zt);
    Vector z_new = (z_half + zt).cwiseMax(0.0);
    auto [rn, sn] = residuals(z_half, z_new, z, cfg.rho);
    if (!std::isfinite(rn) || !std::isfinite(sn))
      throw NumericalDivergence("solve: residuals became non-finite at iteration " +
                                std::to_string(k));
    zt += z_half - z_new;
    z = std::move(z_new);

    sol.iterations = k;
    sol.r_norm = rn;
    sol.s_norm = sn;
    if (cfg.history) cfg.history->push_back({k, rn, sn});
    if (cfg.diag_stream && cfg.diag_every > 0 && k % cfg.diag_every == 0) {
      *cfg.diag_stream << k << "," << fmt_double(rn) << "," << fmt_double(sn);
      for (int c : mu_coords) *cfg.diag_stream << "," << fmt_double(z[c]);
      *cfg.diag_stream << "\n";
    }

    double eps_pri = sqrt_d * cfg.eps_abs + cfg.eps_rel * std::max(z_half.norm(), z.norm());
    double eps_dual = sqrt_d * cfg.eps_abs + cfg.eps_rel * (cfg.rho * zt).norm();
    if (rn <= eps_pri && sn <= eps_dual) {
      sol.converged = Converged::Full;
      break;
    }

    if (cfg.approx_mu_tolerance && !mu_coords.empty()) {
      std::vector<double> mu_now = detail::gather(z, mu_coords);
      double diff = 0.0, base = 0.0;
      for (std::size_t i = 0; i < mu_now.size(); ++i) {
        diff += (mu_now[i] - mu_prev[i]) * (mu_now[i] - mu_prev[i]);
        base += mu_prev[i] * mu_prev[i];
      }
      double rel = base > 0 ? std::sqrt(diff / base) : (diff == 0 ? 0.0 : 1.0);
      mu_streak = rel < *cfg.approx_mu_tolerance ? mu_streak + 1 : 0;
      mu_prev = std::move(mu_now);
      if (mu_streak >= 10) {
        sol.converged = Converged::ApproxMu;
        break;
      }
    }
  }

  sol.z = std::move(z);
  sol.mu_block = detail::gather(sol.z, mu_coords);
  return sol;
}

/// Complementarity-style optimality measure for z >= 0: the largest
/// |min(z_i, g_i)| with g = Bz - p~. Zero exactly at a KKT point.
inline double nnqp_kkt_residual(const DualQP& qp, const Vector& z) {
  Vector g = qp.apply_B(z) - qp.p_tilde;
  double worst = 0.0;
  for (Index i = 0; i < z.size(); ++i)
    worst = std::max(worst, std::abs(std::min(z[i], g[i])));
  return worst;
}

}  // namespace mooqp
