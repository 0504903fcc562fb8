#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mooqp/admm.hpp"
#include "mooqp/dag.hpp"
#include "mooqp/dual.hpp"
#include "mooqp/error.hpp"
#include "mooqp/generators.hpp"
#include "mooqp/io.hpp"
#include "mooqp/problem.hpp"
#include "mooqp/recovery.hpp"
#include "mooqp/split.hpp"
#include "mooqp/util.hpp"
#include "mooqp/variance_study.hpp"

namespace mooqp::cli {

// Flag set for one command run. Values arrive as strings (CLI flags or a JSON
// config file); the sorted map is what the manifest hash covers.
using Config = std::map<std::string, std::string>;

inline bool has(const Config& c, const std::string& k) { return c.find(k) != c.end(); }

inline std::string get_str(const Config& c, const std::string& k, const std::string& def) {
  auto it = c.find(k);
  return it == c.end() ? def : it->second;
}

inline std::string require(const Config& c, const std::string& k) {
  auto it = c.find(k);
  if (it == c.end() || it->second.empty())
    throw BadParams("missing required flag --" + k);
  return it->second;
}

inline double get_double(const Config& c, const std::string& k, double def) {
  auto it = c.find(k);
  if (it == c.end()) return def;
  const char* s = it->second.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw BadParams("flag --" + k + " expects a number, got '" + it->second + "'");
  return v;
}

inline long long get_ll(const Config& c, const std::string& k, long long def) {
  auto it = c.find(k);
  if (it == c.end()) return def;
  const char* s = it->second.c_str();
  char* end = nullptr;
  long long v = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0')
    throw BadParams("flag --" + k + " expects an integer, got '" + it->second + "'");
  return v;
}

inline int get_int(const Config& c, const std::string& k, int def) {
  return static_cast<int>(get_ll(c, k, def));
}

inline std::uint64_t get_u64(const Config& c, const std::string& k, std::uint64_t def) {
  long long v = get_ll(c, k, static_cast<long long>(def));
  if (v < 0) throw BadParams("flag --" + k + " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

// Config-file values fill in only where the command line stayed silent.
inline void merge_config_file(Config& cfg, const std::string& path) {
  Json j = load_json_file(path);
  if (!j.is_object()) throw InputError("config file must hold a JSON object: " + path);
  for (const auto& [k, v] : j.items()) {
    if (cfg.count(k)) continue;
    cfg[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
}

inline SolverConfig solver_from(const Config& c) {
  SolverConfig cfg;
  cfg.rho = get_double(c, "rho", cfg.rho);
  cfg.eps_abs = get_double(c, "eps-abs", cfg.eps_abs);
  cfg.eps_rel = get_double(c, "eps-rel", cfg.eps_rel);
  cfg.max_iters = get_int(c, "max-iters", cfg.max_iters);
  cfg.dense_limit = get_int(c, "dense-limit", cfg.dense_limit);
  if (has(c, "approx-mu-tol")) cfg.approx_mu_tolerance = get_double(c, "approx-mu-tol", 0.0);
  return cfg;
}

inline const char* converged_name(Converged c) {
  switch (c) {
    case Converged::Full: return "full";
    case Converged::ApproxMu: return "approx-mu";
    case Converged::MaxIters: return "max-iters";
  }
  return "full";
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces

struct PlanRow {
  int user = 0;
  Vector x;
  std::optional<double> nu;
  std::optional<std::pair<int, int>> pattern;
};

// Stage 2: per-user closed-form recovery from the shipped budget duals.
inline std::vector<PlanRow> recover_all(const MooProblem& prob, const std::vector<double>& mu) {
  auto scores = user_scores(prob, mu);
  std::vector<PlanRow> rows;
  rows.reserve(static_cast<std::size_t>(prob.N));
  for (int u = 0; u < prob.N; ++u) {
    const UserScores& us = scores[static_cast<std::size_t>(u)];
    PlanRow row;
    row.user = u;
    const LocalConstraint* lc = prob.local_for(u);
    if (!lc) {
      row.x = (us.c / us.gamma).cwiseMax(0.0).cwiseMin(1.0);
    } else if (lc->kind == LocalConstraint::Kind::SumCap && lc->items.empty()) {
      ServingPlan plan = recover_capped(us, lc->cap);
      row.x = plan.x;
      row.nu = plan.nu;
      row.pattern = plan.active_pattern;
    } else {
      ServingPlan plan = recover_general(us, *lc);
      row.x = plan.x;
      row.nu = plan.nu;
      row.pattern = plan.active_pattern;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Vector stitch_plans(const MooProblem& prob, const std::vector<PlanRow>& plans) {
  Vector x(prob.dim());
  for (const auto& row : plans) x.segment(static_cast<Index>(row.user) * prob.M, prob.M) = row.x;
  return x;
}

inline void write_plans_csv(const std::string& path, const std::string& hash,
                            const MooProblem& prob, const std::vector<PlanRow>& plans) {
  std::vector<std::string> cols{"user"};
  for (int i = 0; i < prob.M; ++i) cols.push_back("x" + std::to_string(i));
  cols.push_back("nu");
  cols.push_back("t1");
  cols.push_back("t2");
  CsvWriter csv(path, hash, cols);
  for (const auto& row : plans) {
    std::vector<std::string> cells{std::to_string(row.user)};
    for (int i = 0; i < prob.M; ++i) cells.push_back(fmt_double(row.x[i]));
    cells.push_back(row.nu ? fmt_double(*row.nu) : "nan");
    cells.push_back(row.pattern ? std::to_string(row.pattern->first) : "-1");
    cells.push_back(row.pattern ? std::to_string(row.pattern->second) : "-1");
    csv.row(cells);
  }
}

// Budget and per-constraint dual rows; the box coordinates are bulk and
// recoverable, so they stay out of the file.
inline void write_duals_csv(const std::string& path, const std::string& hash,
                            const DualQP& qp, const Vector& z) {
  CsvWriter csv(path, hash, {"label", "value"});
  for (std::size_t k = 0; k < qp.index_map.size(); ++k) {
    const DualLabel& label = qp.index_map[k];
    if (label.kind == DualKind::BoxLower || label.kind == DualKind::BoxUpper) continue;
    csv.row({to_string(label), fmt_double(z[static_cast<Index>(k)])});
  }
}

inline std::vector<double> read_budget_duals(const std::string& path, std::size_t m) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<double> mu(m, 0.0);
  std::vector<bool> seen(m, false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("label,", 0) == 0) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError("malformed duals row in " + path);
    std::string label = line.substr(0, comma);
    if (label.rfind("mu[", 0) != 0) continue;
    std::size_t j = static_cast<std::size_t>(std::strtoll(label.c_str() + 3, nullptr, 10));
    if (j >= m) throw InputError("duals file names budget " + label + " beyond the instance");
    mu[j] = std::strtod(line.c_str() + comma + 1, nullptr);
    seen[j] = true;
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!seen[j]) throw InputError("duals file missing mu[" + std::to_string(j) + "]");
  return mu;
}

// Sampled replica of a full instance for configured subsample solves: rows of
// sampled users, locals re-indexed, population-wide bounds scaled by n/N and
// scores optionally variance-reduced toward the full-instance moments.
inline MooProblem subsample_problem(const MooProblem& prob, int n, Estimator est,
                                    std::uint64_t seed) {
  if (n < 2 || n > prob.N) throw BadParams("sample-n must be in [2, N]");
  for (const auto& g : prob.budgets)
    if (g.ref == GlobalBudget::Ref::Inline || !g.users.empty())
      throw BadParams("sampling supports population-wide budgets with derived weights only");

  auto rng = rep_rng(seed, 0);
  auto idx = sample_without_replacement(prob.N, n, rng);
  std::sort(idx.begin(), idx.end());

  MooProblem out = prob;
  out.N = n;
  out.p = detail::take_rows(prob.p, idx);
  out.r = detail::take_rows(prob.r, idx);
  out.q = detail::take_rows(prob.q, idx);
  out.locals.clear();
  for (int t = 0; t < n; ++t)
    if (const LocalConstraint* lc = prob.local_for(idx[static_cast<std::size_t>(t)])) {
      LocalConstraint copy = *lc;
      copy.user = t;
      out.locals.push_back(std::move(copy));
    }
  for (auto& g : out.budgets) g.bound *= static_cast<double>(n) / prob.N;

  if (est != Estimator::Raw) {
    PopulationMoments p_mom = population_moments(prob.p);
    PopulationMoments r_mom = population_moments(prob.r);
    out.p = detail::apply_estimator(est, out.p, p_mom).rows;
    out.r = detail::apply_estimator(est, out.r, r_mom).rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands. Each fills the manifest's diagnostics and output list; the
// wrapper below maps exceptions to exit codes and persists the manifest.

inline void cmd_gen(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  std::string kind = get_str(c, "kind", "uniform");
  std::uint64_t seed = get_u64(c, "seed", 1);
  Instance inst;
  if (kind == "uniform") {
    UniformOpts opts;
    opts.n_budgets = get_int(c, "budgets", opts.n_budgets);
    int N = get_int(c, "N", 8), M = get_int(c, "M", 3);
    inst.problem = gen_uniform(N, M, seed, opts);
    inst.meta = Json{{"kind", kind}, {"seed", seed}, {"N", N}, {"M", M}};
  } else if (kind == "sparse-spike") {
    int N = get_int(c, "N", 200), M = get_int(c, "M", 3);
    inst.problem = gen_sparse_spike_instance(N, M, seed);
    inst.meta = Json{{"kind", kind}, {"seed", seed}, {"N", N}, {"M", M}};
  } else if (kind == "binary-tree") {
    int K = get_int(c, "levels", 6);
    BinaryTreeInstance tree = gen_binary_tree(K, seed);
    inst.problem = tree.problem;
    inst.meta = tree_meta(tree);
  } else {
    throw BadParams("unknown generator kind '" + kind + "'");
  }
  std::string path = out_dir + "/instance.json";
  save_instance(path, inst);
  man.outputs.push_back(path);
  man.diagnostics = Json{{"kind", kind}, {"N", inst.problem.N}, {"M", inst.problem.M}};
  std::cout << "wrote " << path << "\n";
}

inline void cmd_validate(const Config& c, RunManifest& man) {
  Instance inst = load_instance(require(c, "instance"));
  ValidationReport report = validate(inst.problem);
  Json msgs = Json::array();
  for (const auto& v : report.violations) {
    std::cout << v.message << "\n";
    msgs.push_back(v.message);
  }
  man.diagnostics = Json{{"ok", report.ok()}, {"violations", msgs}};
  if (!report.ok())
    throw InputError("instance failed validation (" + std::to_string(report.violations.size()) +
                     " violation(s))");
  std::cout << "instance ok\n";
}

inline void cmd_solve(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  Instance inst = load_instance(require(c, "instance"));
  MooProblem prob = inst.problem;

  ValidationReport report = validate(prob);
  if (!report.ok())
    throw InputError("instance failed validation: " + report.violations[0].message);

  std::uint64_t seed = get_u64(c, "seed", 1);
  int sample_n = get_int(c, "sample-n", 0);
  if (sample_n > 0)
    prob = subsample_problem(prob, sample_n,
                             estimator_from_string(get_str(c, "estimator", "raw")), seed);

  SolverConfig cfg = solver_from(c);
  std::ostringstream diag;
  cfg.diag_every = get_int(c, "diag-every", 0);
  if (cfg.diag_every > 0) cfg.diag_stream = &diag;

  bool origqp_layout = true;
  for (const auto& lc : prob.locals)
    if (lc.kind != LocalConstraint::Kind::SimplexEq) origqp_layout = false;
  DualQP qp = origqp_layout
                  ? assemble_dual(prob)
                  : assemble_rows(prob.a_flat(), prob.gamma, all_constraint_rows(prob), true);
  DualSolution sol = solve(qp, cfg);

  auto plans = recover_all(prob, sol.mu_block);
  Vector x = stitch_plans(prob, plans);
  double objective = prob.objective(x);

  std::string duals_path = out_dir + "/duals.csv";
  write_duals_csv(duals_path, man.config_hash, qp, sol.z);
  man.outputs.push_back(duals_path);
  std::string plans_path = out_dir + "/plans.csv";
  write_plans_csv(plans_path, man.config_hash, prob, plans);
  man.outputs.push_back(plans_path);
  if (cfg.diag_every > 0) {
    std::string diag_path = out_dir + "/solver_iters.csv";
    std::ofstream out(diag_path);
    if (!out) throw InputError("cannot write " + diag_path);
    out << "# manifest: " << man.config_hash << "\n" << diag.str();
    man.outputs.push_back(diag_path);
  }

  Json mu = Json::array();
  for (double v : sol.mu_block) mu.push_back(v);
  man.diagnostics = Json{{"objective", objective},
                         {"iterations", sol.iterations},
                         {"converged", converged_name(sol.converged)},
                         {"r_norm", sol.r_norm},
                         {"s_norm", sol.s_norm},
                         {"kkt_residual", nnqp_kkt_residual(qp, sol.z)},
                         {"dual_dim", qp.dim()},
                         {"layout", origqp_layout ? "simplex" : "general"},
                         {"mu", mu}};
  std::cout << "objective " << fmt_double(objective) << " (" << converged_name(sol.converged)
            << " after " << sol.iterations << " iterations)\n";
}

inline void cmd_recover(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  Instance inst = load_instance(require(c, "instance"));
  std::vector<double> mu = read_budget_duals(require(c, "duals"), inst.problem.budgets.size());
  auto plans = recover_all(inst.problem, mu);
  Vector x = stitch_plans(inst.problem, plans);
  std::string plans_path = out_dir + "/plans.csv";
  write_plans_csv(plans_path, man.config_hash, inst.problem, plans);
  man.outputs.push_back(plans_path);
  man.diagnostics = Json{{"objective", inst.problem.objective(x)}};
  std::cout << "objective " << fmt_double(inst.problem.objective(x)) << "\n";
}

inline void cmd_dag(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  Json j = load_json_file(require(c, "instance"));
  if (!j.contains("subsets") || !j["subsets"].is_array())
    throw InputError("dag input must carry a 'subsets' array");

  std::vector<std::pair<int, std::vector<int>>> subsets;
  for (const auto& s : j["subsets"]) {
    std::vector<int> members;
    int level = -1;
    if (s.is_array()) {
      members = s.get<std::vector<int>>();
    } else if (s.is_object()) {
      members = s.at("members").get<std::vector<int>>();
      level = s.value("level", -1);
    } else {
      throw InputError("each subset must be an array or an object with members");
    }
    if (level < 0) level = static_cast<int>(members.size());
    subsets.emplace_back(level, std::move(members));
  }

  DagBuildOptions opts;
  opts.add_root = get_int(c, "add-root", j.value("add_root", true) ? 1 : 0) != 0;
  if (j.contains("universe")) opts.universe = j["universe"].get<std::vector<int>>();
  ConstraintDag dag = build_dag(subsets, opts);

  bool with_moments = j.contains("features");
  if (with_moments) {
    const auto& rows = j["features"];
    Index nr = static_cast<Index>(rows.size());
    Index nc = nr > 0 ? static_cast<Index>(rows[0].size()) : 0;
    Matrix features(nr, nc);
    for (Index u = 0; u < nr; ++u) {
      const auto& row = rows[static_cast<std::size_t>(u)];
      if (static_cast<Index>(row.size()) != nc)
        throw InputError("feature rows must have equal length");
      for (Index i = 0; i < nc; ++i) features(u, i) = row[static_cast<std::size_t>(i)].get<double>();
    }
    attach_moments(dag, features);
    TimeModel tm;
    if (j.contains("time_model")) {
      tm.coeff = j["time_model"].value("coeff", tm.coeff);
      tm.expo = j["time_model"].value("expo", tm.expo);
    }
    attach_time_estimates(dag, tm);
  }

  std::string dag_path = out_dir + "/dag.json";
  save_json_file(dag_path, dag_to_json(dag));
  man.outputs.push_back(dag_path);
  man.diagnostics = Json{{"nodes", dag.nodes.size()}, {"edges", dag.edges.size()}, {"root", dag.root}};

  if (with_moments && has(c, "w") && has(c, "beta")) {
    double w = get_double(c, "w", 0.5);
    double beta = get_double(c, "beta", 1.0);
    std::vector<int> selected = select_stage2(dag, w, beta);
    std::vector<bool> mark(dag.nodes.size(), false);
    for (int id : selected) mark[static_cast<std::size_t>(id)] = true;
    std::string sel_path = out_dir + "/selection.csv";
    CsvWriter csv(sel_path, man.config_hash, {"id", "level", "n", "selected"});
    for (const auto& node : dag.nodes)
      csv.row({std::to_string(node.id), std::to_string(node.level),
               std::to_string(node.sample_count),
               mark[static_cast<std::size_t>(node.id)] ? "1" : "0"});
    man.outputs.push_back(sel_path);
    man.diagnostics["selected"] = selected.size();
  }
  std::cout << "dag: " << dag.nodes.size() << " nodes, " << dag.edges.size() << " edges\n";
}

inline void cmd_split_curve(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  int reps = get_int(c, "reps", 50);
  if (reps < 1) throw BadParams("reps must be positive");
  std::uint64_t seed = get_u64(c, "seed", 1);
  int threads = get_int(c, "threads", 1);

  BinaryTreeInstance inst;
  if (has(c, "instance")) {
    inst = tree_from_meta(load_instance(get_str(c, "instance", "")).meta);
  } else {
    inst = gen_binary_tree(get_int(c, "levels", 6), get_u64(c, "tree-seed", 20240501));
  }

  auto rows = split_curve(inst, reps, seed, solver_from(c), TimeModel{}, threads);

  std::string path = out_dir + "/split_curve.csv";
  CsvWriter csv(path, man.config_hash, {"split_level", "mse", "online_time_sec"});
  Json measured = Json::array();
  for (const auto& row : rows) {
    csv.row({std::to_string(row.split_level), fmt_double(row.mse),
             fmt_double(row.online_time_modeled)});
    measured.push_back(row.online_time_measured);
  }
  man.outputs.push_back(path);
  man.diagnostics = Json{{"levels", inst.K}, {"reps", reps}, {"measured_online_sec", measured}};
  std::cout << "wrote " << path << "\n";
}

inline void cmd_variance_table(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  int reps = get_int(c, "reps", 200);
  if (reps < 30) throw BadParams("variance table needs reps >= 30");
  int n = get_int(c, "n", 40);
  std::uint64_t seed = get_u64(c, "seed", 1);
  int threads = get_int(c, "threads", 1);

  BenchmarkOpts opts;
  opts.N = get_int(c, "population", opts.N);
  opts.M = get_int(c, "M", opts.M);
  BenchmarkPopulation pop = gen_benchmark_population(get_u64(c, "population-seed", 99), opts);

  std::string path = out_dir + "/variance_table.csv";
  CsvWriter csv(path, man.config_hash,
                {"estimator", "n", "reps", "mu0_mean", "mu0_var", "mu1_mean", "mu1_var",
                 "oob_fraction"});
  SolverConfig cfg = solver_from(c);
  Json diag = Json::object();
  for (Estimator est :
       {Estimator::Raw, Estimator::Additive, Estimator::Full, Estimator::Product}) {
    VarianceReport rep = dual_variance_study(pop, est, n, reps, seed, cfg, threads);
    csv.row({to_string(est), std::to_string(n), std::to_string(reps), fmt_double(rep.mu0_mean),
             fmt_double(rep.mu0_var), fmt_double(rep.mu1_mean), fmt_double(rep.mu1_var),
             fmt_double(rep.oob_fraction)});
    diag[to_string(est)] = Json{{"mu0_var", rep.mu0_var}, {"mu1_var", rep.mu1_var}};
  }
  man.outputs.push_back(path);
  man.diagnostics = diag;
  std::cout << "wrote " << path << "\n";
}

inline void cmd_plot_script(const Config& c, RunManifest& man) {
  std::string out_dir = get_str(c, "out-dir", ".");
  std::string csv = require(c, "csv");
  int xcol = get_int(c, "x-col", 1);
  int ycol = get_int(c, "y-col", 2);
  std::string path = out_dir + "/" + get_str(c, "out", "plot.gp");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "set datafile separator \",\"\n"
      << "set key autotitle columnhead\n"
      << "set term pngcairo size 900,600\n"
      << "set output \"" << csv << ".png\"\n"
      << "set logscale y\n"
      << "plot \"" << csv << "\" using " << xcol << ":" << ycol << " with linespoints\n";
  man.outputs.push_back(path);
  man.diagnostics = Json{{"csv", csv}};
  std::cout << "wrote " << path << "\n";
}

// ---------------------------------------------------------------------------

inline int run_command(const std::string& command, Config cfg) {
  if (has(cfg, "config")) merge_config_file(cfg, get_str(cfg, "config", ""));

  RunManifest man;
  man.command = command;
  for (const auto& kv : cfg) man.config.push_back(kv);
  man.config_hash = config_hash_of(command, man.config);
  man.started = utc_timestamp();

  std::string out_dir = get_str(cfg, "out-dir", ".");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  int code = 0;
  try {
    if (command == "gen") {
      cmd_gen(cfg, man);
    } else if (command == "validate") {
      cmd_validate(cfg, man);
    } else if (command == "solve") {
      cmd_solve(cfg, man);
    } else if (command == "recover") {
      cmd_recover(cfg, man);
    } else if (command == "dag") {
      cmd_dag(cfg, man);
    } else if (command == "split-curve") {
      cmd_split_curve(cfg, man);
    } else if (command == "variance-table") {
      cmd_variance_table(cfg, man);
    } else if (command == "plot-script") {
      cmd_plot_script(cfg, man);
    } else {
      throw BadParams("unknown command '" + command + "'");
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 1;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 3;
  }

  man.finished = utc_timestamp();
  try {
    save_manifest(out_dir + "/manifest.json", man);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (code == 0) code = 3;
  }
  return code;
}

}  // namespace mooqp::cli
