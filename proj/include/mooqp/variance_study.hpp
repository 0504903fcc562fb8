#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mooqp/admm.hpp"
#include "mooqp/dual.hpp"
#include "mooqp/error.hpp"
#include "mooqp/generators.hpp"
#include "mooqp/moment_matching.hpp"
#include "mooqp/util.hpp"

namespace mooqp {

// Score preprocessing applied to a sampled batch before the dual solve.
enum class Estimator { Raw, Additive, Full, Product };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::Raw: return "raw";
    case Estimator::Additive: return "mod1";
    case Estimator::Full: return "mod2";
    case Estimator::Product: return "mod3";
  }
  return "raw";
}

inline Estimator estimator_from_string(const std::string& s) {
  if (s == "raw") return Estimator::Raw;
  if (s == "mod1" || s == "additive") return Estimator::Additive;
  if (s == "mod2" || s == "full") return Estimator::Full;
  if (s == "mod3" || s == "product") return Estimator::Product;
  throw BadParams("unknown estimator '" + s + "' (expected raw|mod1|mod2|mod3)");
}

struct VarianceReport {
  Estimator estimator = Estimator::Raw;
  int n = 0;
  int reps = 0;
  std::vector<double> mu0;  // complaint-cap dual per repetition
  std::vector<double> mu1;  // view-floor dual per repetition
  double mu0_mean = 0, mu0_var = 0;
  double mu1_mean = 0, mu1_var = 0;
  double oob_fraction = 0;         // transformed entries outside [0,1], averaged
  bool insufficient_reps = false;  // fewer than 2 repetitions: variances unusable
};

namespace detail {

inline Matrix take_rows(const Matrix& all, const std::vector<int>& idx) {
  Matrix out(static_cast<Index>(idx.size()), all.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = all.row(idx[k]);
  return out;
}

inline TransformResult apply_estimator(Estimator est, const Matrix& rows,
                                       const PopulationMoments& mom) {
  switch (est) {
    case Estimator::Raw: {
      TransformResult tr;
      tr.rows = rows;
      tr.oob_fraction = 0;
      return tr;
    }
    case Estimator::Additive: return mm_additive(rows, mom);
    case Estimator::Full: return mm_full(rows, mom);
    case Estimator::Product: return mm_product(rows, mom);
  }
  throw BadParams("apply_estimator: unknown estimator");
}

}  // namespace detail

// Repeated subsample-and-solve study of the two budget duals under a chosen
// score estimator. Each repetition draws n users without replacement from the
// population, transforms views and complaints independently against the
// population moments, and solves the resulting dual.
inline VarianceReport dual_variance_study(const BenchmarkPopulation& pop,
                                          Estimator est, int n, int reps,
                                          std::uint64_t seed,
                                          const SolverConfig& cfg = {},
                                          int threads = 1) {
  const int N = static_cast<int>(pop.p_rows.rows());
  if (n < 2 || n > N) throw BadParams("dual_variance_study: need 2 <= n <= population size");
  if (reps < 1) throw BadParams("dual_variance_study: reps must be positive");

  VarianceReport rep;
  rep.estimator = est;
  rep.n = n;
  rep.reps = reps;
  rep.mu0.assign(static_cast<std::size_t>(reps), 0.0);
  rep.mu1.assign(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> oob(static_cast<std::size_t>(reps), 0.0);

  parallel_for(reps, threads, [&](int r) {
    auto rng = rep_rng(seed, static_cast<std::uint64_t>(r));
    auto idx = sample_without_replacement(N, n, rng);
    Matrix p_s = detail::take_rows(pop.p_rows, idx);
    Matrix r_s = detail::take_rows(pop.r_rows, idx);
    TransformResult tp = detail::apply_estimator(est, p_s, pop.p_mom);
    TransformResult tr = detail::apply_estimator(est, r_s, pop.r_mom);
    MooProblem prob = benchmark_instance(pop, tp.rows, tr.rows);
    DualQP qp = assemble_dual(prob);
    DualSolution sol = solve(qp, cfg);
    rep.mu0[static_cast<std::size_t>(r)] = sol.mu_block[0];
    rep.mu1[static_cast<std::size_t>(r)] = sol.mu_block[1];
    oob[static_cast<std::size_t>(r)] = 0.5 * (tp.oob_fraction + tr.oob_fraction);
  });

  rep.mu0_mean = mean_of(rep.mu0);
  rep.mu1_mean = mean_of(rep.mu1);
  rep.oob_fraction = mean_of(oob);
  if (reps < 2) {
    rep.insufficient_reps = true;
  } else {
    double s0 = 0, s1 = 0;
    for (int r = 0; r < reps; ++r) {
      s0 += (rep.mu0[static_cast<std::size_t>(r)] - rep.mu0_mean) *
            (rep.mu0[static_cast<std::size_t>(r)] - rep.mu0_mean);
      s1 += (rep.mu1[static_cast<std::size_t>(r)] - rep.mu1_mean) *
            (rep.mu1[static_cast<std::size_t>(r)] - rep.mu1_mean);
    }
    rep.mu0_var = s0 / (reps - 1);
    rep.mu1_var = s1 / (reps - 1);
  }
  return rep;
}

}  // namespace mooqp
