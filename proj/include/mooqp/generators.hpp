#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/moment_matching.hpp"
#include "mooqp/problem.hpp"
#include "mooqp/types.hpp"
#include "mooqp/util.hpp"

namespace mooqp {

namespace detail {

// Cyclic projection probe for joint feasibility of budgets, local sets and the
// box. Cheap halfspace sweeps are enough here: when the intersection is
// nonempty the iterates settle inside it, otherwise a violation gap persists.
inline std::optional<Vector> find_feasible_point(const MooProblem& prob,
                                                 int rounds = 400,
                                                 double tol = 1e-7) {
  const Index n = prob.dim();
  Vector x = Vector::Constant(n, 0.5);
  std::vector<Vector> w(prob.budgets.size());
  for (std::size_t j = 0; j < prob.budgets.size(); ++j)
    w[j] = prob.budget_weights(prob.budgets[j]);

  auto items_of = [&](const LocalConstraint& lc) {
    std::vector<int> idx = lc.items;
    if (idx.empty())
      for (int i = 0; i < prob.M; ++i) idx.push_back(i);
    return idx;
  };

  for (int round = 0; round < rounds; ++round) {
    for (std::size_t j = 0; j < prob.budgets.size(); ++j) {
      const auto& g = prob.budgets[j];
      double ww = w[j].squaredNorm();
      if (ww <= 0) continue;
      double slack = w[j].dot(x) - g.bound;
      if (g.cmp == Cmp::LessEq && slack > 0) x -= (slack / ww) * w[j];
      if (g.cmp == Cmp::GreaterEq && slack < 0) x -= (slack / ww) * w[j];
    }
    for (const auto& lc : prob.locals) {
      auto idx = items_of(lc);
      double mass = 0;
      for (int i : idx) mass += x[lc.user * prob.M + i];
      double m = static_cast<double>(idx.size());
      switch (lc.kind) {
        case LocalConstraint::Kind::SumCap:
          if (mass > lc.cap)
            for (int i : idx) x[lc.user * prob.M + i] -= (mass - lc.cap) / m;
          break;
        case LocalConstraint::Kind::SumFloor:
          if (mass < lc.floor_bound)
            for (int i : idx) x[lc.user * prob.M + i] += (lc.floor_bound - mass) / m;
          break;
        case LocalConstraint::Kind::SimplexEq:
          for (int i : idx) x[lc.user * prob.M + i] += (1.0 - mass) / m;
          break;
        case LocalConstraint::Kind::GeneralLinear:
          for (Index k = 0; k < lc.A.rows(); ++k) {
            double dot = 0, nrm = 0;
            for (std::size_t c = 0; c < idx.size(); ++c) {
              dot += lc.A(k, static_cast<Index>(c)) * x[lc.user * prob.M + idx[c]];
              nrm += lc.A(k, static_cast<Index>(c)) * lc.A(k, static_cast<Index>(c));
            }
            if (nrm <= 0) continue;
            double over = dot - lc.b[k];
            if (over > 0)
              for (std::size_t c = 0; c < idx.size(); ++c)
                x[lc.user * prob.M + idx[c]] -= over / nrm * lc.A(k, static_cast<Index>(c));
          }
          break;
      }
    }
    x = x.cwiseMax(0.0).cwiseMin(1.0);
  }

  // Measure the worst remaining violation.
  double worst = 0;
  for (std::size_t j = 0; j < prob.budgets.size(); ++j) {
    double slack = w[j].dot(x) - prob.budgets[j].bound;
    worst = std::max(worst, prob.budgets[j].cmp == Cmp::LessEq ? slack : -slack);
  }
  for (const auto& lc : prob.locals) {
    auto idx = items_of(lc);
    double mass = 0;
    for (int i : idx) mass += x[lc.user * prob.M + i];
    switch (lc.kind) {
      case LocalConstraint::Kind::SumCap: worst = std::max(worst, mass - lc.cap); break;
      case LocalConstraint::Kind::SumFloor: worst = std::max(worst, lc.floor_bound - mass); break;
      case LocalConstraint::Kind::SimplexEq: worst = std::max(worst, std::abs(mass - 1.0)); break;
      case LocalConstraint::Kind::GeneralLinear:
        for (Index k = 0; k < lc.A.rows(); ++k) {
          double dot = 0;
          for (std::size_t c = 0; c < idx.size(); ++c)
            dot += lc.A(k, static_cast<Index>(c)) * x[lc.user * prob.M + idx[c]];
          worst = std::max(worst, dot - lc.b[k]);
        }
        break;
    }
  }
  if (worst <= tol) return x;
  return std::nullopt;
}

}  // namespace detail

struct UniformOpts {
  int n_budgets = 2;         // 1 = complaint cap only, 2 = adds a view floor
  bool mixed_locals = true;  // draw a per-user local set (or none) at random
  double cap_frac = 0.6;     // complaint bound as a fraction of unconstrained usage
  double floor_frac = 0.35;  // view bound as a fraction of unconstrained usage
  double gamma_lo = 0.5;
  double gamma_hi = 2.0;
  int max_attempts = 16;
};

// Random dense instance with every score in (0,1), a complaint-rate cap, an
// optional view floor and a mix of per-user local sets. Bounds are placed as
// fractions of the usage of the unconstrained optimum so they usually bind,
// and each draw is checked for joint feasibility before being returned.
inline MooProblem gen_uniform(int N, int M, std::uint64_t seed,
                              const UniformOpts& opts = {}) {
  if (N < 1 || M < 1) throw BadParams("gen_uniform: N and M must be positive");
  if (opts.n_budgets < 1 || opts.n_budgets > 2)
    throw BadParams("gen_uniform: n_budgets must be 1 or 2");

  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    auto rng = rep_rng(seed, static_cast<std::uint64_t>(attempt) * 1000003ull);
    MooProblem prob;
    prob.N = N;
    prob.M = M;
    prob.gamma = runif(rng, opts.gamma_lo, opts.gamma_hi);
    prob.p = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.95); });
    prob.r = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.95); });
    prob.q = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.95); });

    if (opts.mixed_locals) {
      for (int u = 0; u < N; ++u) {
        switch (rng() % 6) {
          case 2: {
            LocalConstraint lc;
            lc.kind = LocalConstraint::Kind::SumCap;
            lc.user = u;
            lc.cap = std::max(0.3, runif(rng, 0.5, 0.8 * M));
            prob.locals.push_back(lc);
            break;
          }
          case 3: {
            LocalConstraint lc;
            lc.kind = LocalConstraint::Kind::SumFloor;
            lc.user = u;
            lc.floor_bound = runif(rng, 0.1, 0.4 * M);
            prob.locals.push_back(lc);
            break;
          }
          case 4: {
            if (M < 2) break;  // an equality on one item pins it entirely
            LocalConstraint lc;
            lc.kind = LocalConstraint::Kind::SimplexEq;
            lc.user = u;
            prob.locals.push_back(lc);
            break;
          }
          case 5: {
            LocalConstraint lc;
            lc.kind = LocalConstraint::Kind::GeneralLinear;
            lc.user = u;
            Index rows = 1 + static_cast<Index>(rng() % 2);
            lc.A = Matrix::NullaryExpr(rows, M, [&](Index, Index) { return runif(rng, -0.5, 1.0); });
            Vector x0 = Vector::NullaryExpr(M, [&](Index) { return runif(rng, 0.1, 0.9); });
            lc.b = lc.A * x0;
            for (Index k = 0; k < rows; ++k) lc.b[k] += runif(rng, 0.05, 0.3);
            prob.locals.push_back(lc);
            break;
          }
          default: break;  // no local set for this user
        }
      }
    }

    Vector x_unc = (prob.a_flat() / prob.gamma).cwiseMax(0.0).cwiseMin(1.0);
    {
      GlobalBudget g;
      g.ref = GlobalBudget::Ref::R;
      g.cmp = Cmp::LessEq;
      g.bound = opts.cap_frac * prob.budget_weights(g).dot(x_unc);
      prob.budgets.push_back(g);
    }
    if (opts.n_budgets >= 2) {
      GlobalBudget g;
      g.ref = GlobalBudget::Ref::P;
      g.cmp = Cmp::GreaterEq;
      g.bound = opts.floor_frac * prob.budget_weights(g).dot(x_unc);
      prob.budgets.push_back(g);
    }

    if (detail::find_feasible_point(prob)) return prob;
  }
  throw Error("gen_uniform: no feasible draw after max_attempts");
}

struct SpikeOpts {
  double spike_weight = 0.1;  // fraction of entries drawn from the spike
  double spike_value = 0.85;
  double spike_sd = 0.02;
  double base_lo = 0.02;
  double base_hi = 0.45;
};

// Two-component marginal: a diffuse low-rate base plus a tight spike of
// highly engaged entries. Mimics the heavy upper cluster seen in production
// engagement scores.
inline Matrix gen_sparse_spike_rows(int n, int m, std::uint64_t seed,
                                    const SpikeOpts& opts = {}) {
  if (n < 1 || m < 1) throw BadParams("gen_sparse_spike_rows: n and m must be positive");
  auto rng = rep_rng(seed);
  Matrix rows(n, m);
  for (Index u = 0; u < n; ++u)
    for (Index i = 0; i < m; ++i) {
      if (runif(rng) < opts.spike_weight)
        rows(u, i) = std::min(1.0, std::max(0.0, opts.spike_value + opts.spike_sd * rnorm(rng)));
      else
        rows(u, i) = runif(rng, opts.base_lo, opts.base_hi);
    }
  return rows;
}

// Full instance around spike-mixture view scores: complaints correlate with
// views, single complaint cap placed like gen_uniform's.
inline MooProblem gen_sparse_spike_instance(int N, int M, std::uint64_t seed,
                                            const SpikeOpts& opts = {}) {
  auto rng = rep_rng(seed, 0x9e3779b97f4a7c15ull);
  MooProblem prob;
  prob.N = N;
  prob.M = M;
  prob.gamma = 1.5;
  prob.p = gen_sparse_spike_rows(N, M, seed, opts);
  prob.r = prob.p;
  for (Index u = 0; u < N; ++u)
    for (Index i = 0; i < M; ++i)
      prob.r(u, i) = std::min(0.99, std::max(0.01, 0.08 + 0.35 * prob.p(u, i) + 0.05 * rnorm(rng)));
  prob.q = Matrix::NullaryExpr(N, M, [&](Index, Index) { return runif(rng, 0.05, 0.5); });

  Vector x_unc = (prob.a_flat() / prob.gamma).cwiseMax(0.0).cwiseMin(1.0);
  GlobalBudget g;
  g.ref = GlobalBudget::Ref::R;
  g.cmp = Cmp::LessEq;
  g.bound = 0.6 * prob.budget_weights(g).dot(x_unc);
  prob.budgets.push_back(g);
  return prob;
}

struct TreeOpts {
  double gamma = 2.0;
  double p_lo = 0.2;
  double p_hi = 0.8;
  double tight_base = 0.30;  // leaf-level serving floor per unit of view mass
  double tight_step = 0.02;  // added per level toward the root
  double noise_sd = 0.05;    // measurement noise used for offline replicas
};

struct TreeNodeRef {
  int depth = 0;       // 0 = root
  int first_user = 0;  // contiguous user block [first_user, first_user + size)
  int size = 0;
  int budget_index = -1;  // row in problem.budgets carrying this node's floor
};

struct BinaryTreeInstance {
  MooProblem problem;  // ground-truth scores and bounds
  int K = 0;           // depth of the leaf level; N = 2^K users
  std::vector<TreeNodeRef> nodes;  // depth-ascending, position-ascending
  TreeOpts opts;
  std::uint64_t seed = 0;
};

// Nested audience-segment instance: one view-mass floor per node of a complete
// binary segmentation of 2^K users, tighter toward the root.
inline BinaryTreeInstance gen_binary_tree(int K, std::uint64_t seed,
                                          const TreeOpts& opts = {}) {
  if (K < 1 || K > 12) throw BadParams("gen_binary_tree: K must be in [1, 12]");
  const int N = 1 << K;
  BinaryTreeInstance inst;
  inst.K = K;
  inst.opts = opts;
  inst.seed = seed;

  auto rng = rep_rng(seed);
  MooProblem& prob = inst.problem;
  prob.N = N;
  prob.M = 1;
  prob.gamma = opts.gamma;
  prob.p = Matrix::NullaryExpr(N, 1, [&](Index, Index) { return runif(rng, opts.p_lo, opts.p_hi); });
  prob.r = prob.p;
  prob.q = Matrix::Zero(N, 1);

  for (int d = 0; d <= K; ++d) {
    int width = N >> d;
    double tight = opts.tight_base + opts.tight_step * (K - d);
    for (int j = 0; j < (1 << d); ++j) {
      TreeNodeRef node;
      node.depth = d;
      node.first_user = j * width;
      node.size = width;
      GlobalBudget g;
      g.ref = GlobalBudget::Ref::P;
      g.cmp = Cmp::GreaterEq;
      g.users.resize(static_cast<std::size_t>(width));
      double mass = 0;
      for (int u = 0; u < width; ++u) {
        g.users[static_cast<std::size_t>(u)] = node.first_user + u;
        mass += prob.p(node.first_user + u, 0);
      }
      g.bound = tight * mass;
      node.budget_index = static_cast<int>(prob.budgets.size());
      prob.budgets.push_back(std::move(g));
      inst.nodes.push_back(node);
    }
  }
  return inst;
}

// Offline replica of a tree instance: same bounds, view scores re-measured
// with iid noise. rep selects the noise stream.
inline MooProblem noisy_offline_problem(const BinaryTreeInstance& inst,
                                        std::uint64_t rep) {
  auto rng = rep_rng(inst.seed ^ 0x5bf03635ull, rep);
  MooProblem off = inst.problem;
  for (Index u = 0; u < off.p.rows(); ++u)
    off.p(u, 0) = std::min(0.99, std::max(0.01, off.p(u, 0) + inst.opts.noise_sd * rnorm(rng)));
  off.r = off.p;
  return off;
}

struct BenchmarkOpts {
  int N = 1000;  // population size
  int M = 2;
  double gamma = 2.0;
  double q_value = 0.1;
  // The floor drives usage to roughly 0.26 of availability, so the cap
  // fraction sits below that to keep both duals strictly active.
  double g0_frac = 0.15;  // complaint cap per user, fraction of mean complaint mass
  double g1_frac = 0.30;  // view floor per user, fraction of mean view mass
  SpikeOpts spikes;
};

// Fixed population used by the estimator-variance experiments. Per-user
// bounds are calibrated against population means so both budget rows stay
// active across subsamples.
struct BenchmarkPopulation {
  Matrix p_rows;  // N x M view scores
  Matrix r_rows;  // N x M complaint scores
  PopulationMoments p_mom;
  PopulationMoments r_mom;
  double gamma = 2.0;
  double q_value = 0.1;
  double g0 = 0;  // complaint bound contributed per sampled user
  double g1 = 0;  // view bound contributed per sampled user
  int M = 2;
};

inline BenchmarkPopulation gen_benchmark_population(std::uint64_t seed,
                                                    const BenchmarkOpts& opts = {}) {
  if (opts.N < 2 || opts.M < 1)
    throw BadParams("gen_benchmark_population: need N >= 2 and M >= 1");
  BenchmarkPopulation pop;
  pop.M = opts.M;
  pop.gamma = opts.gamma;
  pop.q_value = opts.q_value;
  pop.p_rows = gen_sparse_spike_rows(opts.N, opts.M, seed, opts.spikes);
  auto rng = rep_rng(seed, 0xbeefull);
  pop.r_rows = pop.p_rows;
  for (Index u = 0; u < pop.r_rows.rows(); ++u)
    for (Index i = 0; i < pop.r_rows.cols(); ++i)
      pop.r_rows(u, i) =
          std::min(0.99, std::max(0.01, 0.08 + 0.35 * pop.p_rows(u, i) + 0.05 * rnorm(rng)));
  pop.p_mom = population_moments(pop.p_rows);
  pop.r_mom = population_moments(pop.r_rows);
  pop.g0 = opts.g0_frac * opts.M * pop.r_mom.theta.mean();
  pop.g1 = opts.g1_frac * opts.M * pop.p_mom.theta.mean();
  return pop;
}

// Instance for a sampled (possibly transformed) batch of users. Scores enter
// as inline budget weights; the quadratic pull comes from the editorial prior
// q alone, so the duals react only through the budget rows.
inline MooProblem benchmark_instance(const BenchmarkPopulation& pop,
                                     const Matrix& p_sampled,
                                     const Matrix& r_sampled) {
  if (p_sampled.rows() != r_sampled.rows() || p_sampled.cols() != pop.M ||
      r_sampled.cols() != pop.M)
    throw DimensionMismatch("benchmark_instance: sampled matrices disagree");
  const int n = static_cast<int>(p_sampled.rows());
  MooProblem prob;
  prob.N = n;
  prob.M = pop.M;
  prob.gamma = pop.gamma;
  prob.p = Matrix::Zero(n, pop.M);
  prob.r = Matrix::Zero(n, pop.M);
  prob.q = Matrix::Constant(n, pop.M, pop.q_value);

  GlobalBudget cap;
  cap.ref = GlobalBudget::Ref::Inline;
  cap.cmp = Cmp::LessEq;
  cap.weights = r_sampled;
  GlobalBudget floor;
  floor.ref = GlobalBudget::Ref::Inline;
  floor.cmp = Cmp::GreaterEq;
  floor.weights = p_sampled;
  cap.bound = pop.g0 * n;
  floor.bound = pop.g1 * n;
  prob.budgets.push_back(std::move(cap));
  prob.budgets.push_back(std::move(floor));
  return prob;
}

}  // namespace mooqp
