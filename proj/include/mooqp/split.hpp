#pragma once

#include <cstdint>
#include <vector>

#include "mooqp/admm.hpp"
#include "mooqp/dag.hpp"
#include "mooqp/dual.hpp"
#include "mooqp/error.hpp"
#include "mooqp/generators.hpp"
#include "mooqp/util.hpp"

namespace mooqp {

struct FullSolve {
  Vector x;
  double objective = 0;
  std::vector<double> budget_duals;  // one per problem budget, assembly order
  DualSolution dual;
};

// Reference path: dualize every constraint of the problem and read the primal
// off stationarity. Budget rows come first in the assembly, so their duals
// sit in the leading coordinates.
inline FullSolve solve_full(const MooProblem& prob, const SolverConfig& cfg = {}) {
  auto rows = all_constraint_rows(prob);
  DualQP qp = assemble_rows(prob.a_flat(), prob.gamma, rows, true);
  FullSolve out;
  out.dual = solve(qp, cfg);
  out.x = primal_from_dual_stationarity(qp, out.dual.z).cwiseMax(0.0).cwiseMin(1.0);
  out.objective = prob.objective(out.x);
  out.budget_duals.resize(prob.budgets.size());
  for (std::size_t j = 0; j < prob.budgets.size(); ++j)
    out.budget_duals[j] = out.dual.z[static_cast<Index>(j)];
  return out;
}

struct SplitResult {
  double objective = 0;             // stitched plan scored on the true objective
  double online_time_modeled = 0;   // sum of the time model over subtree sizes
  double online_time_measured = 0;  // wall seconds spent in the online solves
  Vector x;
};

// Serve a tree instance with the segment floors above the cut folded into the
// scores via trusted duals, and each depth-k subtree re-solved exactly.
// mu holds one dual per problem budget (solve_full order on the offline
// replica); only entries for nodes above the cut are consulted.
inline SplitResult split_solve(const BinaryTreeInstance& inst,
                               const std::vector<double>& mu, int k,
                               const SolverConfig& cfg = {},
                               const TimeModel& tm = {}) {
  const int K = inst.K;
  if (k < 1 || k > K) throw BadParams("split_solve: cut level must be in [1, K]");
  if (mu.size() != inst.problem.budgets.size())
    throw DimensionMismatch("split_solve: one dual per budget expected");

  const MooProblem& prob = inst.problem;
  Vector a = prob.a_flat();
  SplitResult out;
  out.x = Vector::Zero(prob.dim());

  Timer timer;
  for (const auto& node : inst.nodes) {
    if (node.depth != k) continue;
    const int first = node.first_user;
    const int size = node.size;

    // Trusted pressure from every segment floor above the cut. All of them
    // contain this subtree wholesale, and each is a >= row in the views.
    double mu_above = 0;
    for (int d = 0; d < k; ++d) {
      int j = first >> (K - d);
      mu_above += mu[static_cast<std::size_t>(inst.nodes[(1 << d) - 1 + j].budget_index)];
    }

    Vector c(size);
    for (int t = 0; t < size; ++t)
      c[t] = a[first + t] + mu_above * prob.p(first + t, 0);

    // Floors at or below the cut that live inside this subtree.
    std::vector<ConstraintRow> rows;
    for (const auto& sub : inst.nodes) {
      if (sub.depth < k) continue;
      if (sub.first_user < first || sub.first_user + sub.size > first + size) continue;
      ConstraintRow row;
      row.w = Vector::Zero(size);
      for (int t = 0; t < sub.size; ++t)
        row.w[sub.first_user - first + t] = prob.p(sub.first_user + t, 0);
      row.cmp = Cmp::GreaterEq;
      row.bound = prob.budgets[static_cast<std::size_t>(sub.budget_index)].bound;
      row.label = DualLabel{DualKind::Budget, sub.budget_index, -1};
      rows.push_back(std::move(row));
    }

    DualQP qp = assemble_rows(c, prob.gamma, rows, true);
    DualSolution sol = solve(qp, cfg);
    Vector x_sub = primal_from_dual_stationarity(qp, sol.z).cwiseMax(0.0).cwiseMin(1.0);
    for (int t = 0; t < size; ++t) out.x[first + t] = x_sub[t];
    out.online_time_modeled += tm.at(size);
  }
  out.online_time_measured = timer.seconds();
  out.objective = prob.objective(out.x);
  return out;
}

struct SplitCurveRow {
  int split_level = 0;
  double mse = 0;                   // against the exact full solve, over reps
  double online_time_modeled = 0;   // per repetition (deterministic)
  double online_time_measured = 0;  // wall seconds summed over reps
};

// Accuracy/cost trade-off curve: for each cut level, repeat the offline
// measure -> trust duals -> online subtree solve loop on fresh noisy offline
// replicas and score the stitched plans against the exact solution.
inline std::vector<SplitCurveRow> split_curve(const BinaryTreeInstance& inst,
                                              int reps, std::uint64_t seed,
                                              const SolverConfig& cfg = {},
                                              const TimeModel& tm = {},
                                              int threads = 1) {
  if (reps < 1) throw BadParams("split_curve: reps must be positive");
  const int K = inst.K;

  SolverConfig exact_cfg = cfg;
  exact_cfg.eps_abs = 1e-9;
  exact_cfg.eps_rel = 1e-7;
  const double obj_star = solve_full(inst.problem, exact_cfg).objective;

  std::vector<std::vector<double>> obj(
      static_cast<std::size_t>(reps), std::vector<double>(static_cast<std::size_t>(K), 0.0));
  std::vector<std::vector<double>> modeled = obj, measured = obj;

  parallel_for(reps, threads, [&](int r) {
    MooProblem offline = noisy_offline_problem(inst, static_cast<std::uint64_t>(seed + r));
    FullSolve off = solve_full(offline, cfg);
    for (int k = 1; k <= K; ++k) {
      SplitResult sr = split_solve(inst, off.budget_duals, k, cfg, tm);
      obj[static_cast<std::size_t>(r)][static_cast<std::size_t>(k - 1)] = sr.objective;
      modeled[static_cast<std::size_t>(r)][static_cast<std::size_t>(k - 1)] = sr.online_time_modeled;
      measured[static_cast<std::size_t>(r)][static_cast<std::size_t>(k - 1)] = sr.online_time_measured;
    }
  });

  std::vector<SplitCurveRow> rowsv;
  for (int k = 1; k <= K; ++k) {
    SplitCurveRow row;
    row.split_level = k;
    for (int r = 0; r < reps; ++r) {
      double d = obj[static_cast<std::size_t>(r)][static_cast<std::size_t>(k - 1)] - obj_star;
      row.mse += d * d;
      row.online_time_measured += measured[static_cast<std::size_t>(r)][static_cast<std::size_t>(k - 1)];
    }
    row.mse /= reps;
    row.online_time_modeled = modeled[0][static_cast<std::size_t>(k - 1)];
    rowsv.push_back(row);
  }
  return rowsv;
}

}  // namespace mooqp
