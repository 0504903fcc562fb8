#include <string>

#include <CLI11.hpp>

#include <mooqp/harness.hpp>

namespace {

using mooqp::cli::Config;

// Every flag lands in the config map as text; the harness owns parsing and
// defaults so that file-supplied and CLI-supplied values behave identically.
void bind_flag(CLI::App* sub, Config& cfg, const std::string& flag, const std::string& key,
          const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&cfg, key](const std::string& v) { cfg[key] = v; }, help);
}

void add_common(CLI::App* sub, Config& cfg) {
  bind_flag(sub, cfg, "--config", "config", "JSON file with default flag values");
  bind_flag(sub, cfg, "--seed", "seed", "RNG seed (default 1)");
  bind_flag(sub, cfg, "--out-dir", "out-dir", "output directory (default .)");
  bind_flag(sub, cfg, "--threads", "threads", "worker threads (default 1)");
}

void add_solver(CLI::App* sub, Config& cfg) {
  bind_flag(sub, cfg, "--rho", "rho", "splitting penalty (default 1.0)");
  bind_flag(sub, cfg, "--eps-abs", "eps-abs", "absolute stopping tolerance (default 1e-6)");
  bind_flag(sub, cfg, "--eps-rel", "eps-rel", "relative stopping tolerance (default 1e-4)");
  bind_flag(sub, cfg, "--max-iters", "max-iters", "iteration cap (default 100000)");
  bind_flag(sub, cfg, "--dense-limit", "dense-limit", "largest dual dim for the factorized path");
  bind_flag(sub, cfg, "--approx-mu-tol", "approx-mu-tol", "early stop on the budget-dual block");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted serving-plan solver: dual solves, per-user recovery, "
               "segment-tree splits and estimator studies"};
  app.require_subcommand(1);
  Config cfg;

  CLI::App* gen = app.add_subcommand("gen", "generate an instance file");
  add_common(gen, cfg);
  bind_flag(gen, cfg, "--kind", "kind", "uniform | sparse-spike | binary-tree");
  bind_flag(gen, cfg, "--N", "N", "number of users");
  bind_flag(gen, cfg, "--M", "M", "items per user");
  bind_flag(gen, cfg, "--budgets", "budgets", "number of global budgets (uniform kind)");
  bind_flag(gen, cfg, "--levels", "levels", "tree depth (binary-tree kind)");

  CLI::App* validate = app.add_subcommand("validate", "check an instance file");
  add_common(validate, cfg);
  bind_flag(validate, cfg, "--instance", "instance", "instance JSON path");

  CLI::App* solve = app.add_subcommand("solve", "two-stage solve of an instance");
  add_common(solve, cfg);
  add_solver(solve, cfg);
  bind_flag(solve, cfg, "--instance", "instance", "instance JSON path");
  bind_flag(solve, cfg, "--sample-n", "sample-n", "solve on a subsample of this many users");
  bind_flag(solve, cfg, "--estimator", "estimator", "raw | mod1 | mod2 | mod3 (with --sample-n)");
  bind_flag(solve, cfg, "--diag-every", "diag-every", "write solver residuals every k iterations");

  CLI::App* recover = app.add_subcommand("recover", "per-user plans from shipped duals");
  add_common(recover, cfg);
  bind_flag(recover, cfg, "--instance", "instance", "instance JSON path");
  bind_flag(recover, cfg, "--duals", "duals", "duals CSV from a solve run");

  CLI::App* dag = app.add_subcommand("dag", "build the segment containment graph");
  add_common(dag, cfg);
  bind_flag(dag, cfg, "--instance", "instance", "subsets JSON path");
  bind_flag(dag, cfg, "--add-root", "add-root", "synthesize the full-set root (0/1)");
  bind_flag(dag, cfg, "--w", "w", "cost weight for stage-2 selection");
  bind_flag(dag, cfg, "--beta", "beta", "selection threshold");

  CLI::App* split = app.add_subcommand("split-curve", "accuracy/cost curve over cut levels");
  add_common(split, cfg);
  add_solver(split, cfg);
  bind_flag(split, cfg, "--instance", "instance", "binary-tree instance JSON (else generated)");
  bind_flag(split, cfg, "--levels", "levels", "tree depth when generating (default 6)");
  bind_flag(split, cfg, "--tree-seed", "tree-seed", "seed for the generated tree instance");
  bind_flag(split, cfg, "--reps", "reps", "offline noise repetitions (default 50)");

  CLI::App* var = app.add_subcommand("variance-table", "dual variance by estimator");
  add_common(var, cfg);
  add_solver(var, cfg);
  bind_flag(var, cfg, "--n", "n", "subsample size per repetition (default 40)");
  bind_flag(var, cfg, "--reps", "reps", "repetitions, at least 30 (default 200)");
  bind_flag(var, cfg, "--population", "population", "population size (default 1000)");
  bind_flag(var, cfg, "--population-seed", "population-seed", "seed for the fixed population");
  bind_flag(var, cfg, "--M", "M", "items per user (default 2)");

  CLI::App* plot = app.add_subcommand("plot-script", "emit a gnuplot script for a CSV");
  add_common(plot, cfg);
  bind_flag(plot, cfg, "--csv", "csv", "CSV file to plot");
  bind_flag(plot, cfg, "--out", "out", "script filename (default plot.gp)");
  bind_flag(plot, cfg, "--x-col", "x-col", "x column, 1-based (default 1)");
  bind_flag(plot, cfg, "--y-col", "y-col", "y column, 1-based (default 2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  return mooqp::cli::run_command(app.get_subcommands().front()->get_name(), cfg);
}
