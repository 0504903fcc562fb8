#pragma once

#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mooqp/dag.hpp"
#include "mooqp/error.hpp"
#include "mooqp/generators.hpp"
#include "mooqp/problem.hpp"
#include "mooqp/util.hpp"

namespace mooqp {

using Json = nlohmann::json;

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    Json j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    throw InputError("failed to parse " + path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << "\n";
}

namespace detail {

inline Json matrix_to_flat(const Matrix& m) {
  Json arr = Json::array();
  for (Index u = 0; u < m.rows(); ++u)
    for (Index i = 0; i < m.cols(); ++i) arr.push_back(m(u, i));
  return arr;
}

inline Matrix flat_to_matrix(const Json& arr, Index rows, Index cols, const char* name) {
  if (!arr.is_array() || static_cast<Index>(arr.size()) != rows * cols)
    throw DimensionMismatch(std::string(name) + " must hold N*M row-major entries");
  Matrix m(rows, cols);
  Index k = 0;
  for (Index u = 0; u < rows; ++u)
    for (Index i = 0; i < cols; ++i) m(u, i) = arr[static_cast<std::size_t>(k++)].get<double>();
  return m;
}

}  // namespace detail

inline Json to_json(const MooProblem& prob) {
  Json j;
  j["N"] = prob.N;
  j["M"] = prob.M;
  j["gamma"] = prob.gamma;
  j["p"] = detail::matrix_to_flat(prob.p);
  j["r"] = detail::matrix_to_flat(prob.r);
  j["q"] = detail::matrix_to_flat(prob.q);
  j["budgets"] = Json::array();
  for (const auto& g : prob.budgets) {
    Json b;
    switch (g.ref) {
      case GlobalBudget::Ref::R: b["weights_ref"] = "r"; break;
      case GlobalBudget::Ref::P: b["weights_ref"] = "p"; break;
      case GlobalBudget::Ref::Inline:
        b["weights_ref"] = "inline";
        b["weights"] = detail::matrix_to_flat(g.weights);
        break;
    }
    if (!g.users.empty()) b["users"] = g.users;
    b["direction"] = g.cmp == Cmp::LessEq ? "<=" : ">=";
    b["bound"] = g.bound;
    j["budgets"].push_back(std::move(b));
  }
  j["locals"] = Json::array();
  for (const auto& lc : prob.locals) {
    Json l;
    l["user"] = lc.user;
    if (!lc.items.empty()) l["items"] = lc.items;
    switch (lc.kind) {
      case LocalConstraint::Kind::SumCap:
        l["kind"] = "sum_cap";
        l["cap"] = lc.cap;
        break;
      case LocalConstraint::Kind::SumFloor:
        l["kind"] = "sum_floor";
        l["floor"] = lc.floor_bound;
        break;
      case LocalConstraint::Kind::SimplexEq:
        l["kind"] = "simplex_eq";
        break;
      case LocalConstraint::Kind::GeneralLinear: {
        l["kind"] = "general_linear";
        Json rows = Json::array();
        for (Index k = 0; k < lc.A.rows(); ++k) {
          Json row = Json::array();
          for (Index c = 0; c < lc.A.cols(); ++c) row.push_back(lc.A(k, c));
          rows.push_back(std::move(row));
        }
        l["A"] = std::move(rows);
        Json b = Json::array();
        for (Index k = 0; k < lc.b.size(); ++k) b.push_back(lc.b[k]);
        l["b"] = std::move(b);
        break;
      }
    }
    j["locals"].push_back(std::move(l));
  }
  return j;
}

inline MooProblem problem_from_json(const Json& j) {
  MooProblem prob;
  try {
    prob.N = j.at("N").get<int>();
    prob.M = j.at("M").get<int>();
    prob.gamma = j.at("gamma").get<double>();
    if (prob.N < 1 || prob.M < 1) throw BadParams("N and M must be positive");
    prob.p = detail::flat_to_matrix(j.at("p"), prob.N, prob.M, "p");
    prob.r = detail::flat_to_matrix(j.at("r"), prob.N, prob.M, "r");
    prob.q = detail::flat_to_matrix(j.at("q"), prob.N, prob.M, "q");
    for (const auto& b : j.value("budgets", Json::array())) {
      GlobalBudget g;
      std::string ref = b.at("weights_ref").get<std::string>();
      if (ref == "r") {
        g.ref = GlobalBudget::Ref::R;
      } else if (ref == "p") {
        g.ref = GlobalBudget::Ref::P;
      } else if (ref == "inline") {
        g.ref = GlobalBudget::Ref::Inline;
        g.weights = detail::flat_to_matrix(b.at("weights"), prob.N, prob.M, "budget weights");
      } else {
        throw BadParams("budget weights_ref must be r, p or inline");
      }
      if (b.contains("users")) g.users = b.at("users").get<std::vector<int>>();
      std::string dir = b.at("direction").get<std::string>();
      if (dir == "<=") {
        g.cmp = Cmp::LessEq;
      } else if (dir == ">=") {
        g.cmp = Cmp::GreaterEq;
      } else {
        throw BadParams("budget direction must be <= or >=");
      }
      g.bound = b.at("bound").get<double>();
      prob.budgets.push_back(std::move(g));
    }
    for (const auto& l : j.value("locals", Json::array())) {
      LocalConstraint lc;
      lc.user = l.at("user").get<int>();
      if (l.contains("items")) lc.items = l.at("items").get<std::vector<int>>();
      std::string kind = l.at("kind").get<std::string>();
      if (kind == "sum_cap") {
        lc.kind = LocalConstraint::Kind::SumCap;
        lc.cap = l.at("cap").get<double>();
      } else if (kind == "sum_floor") {
        lc.kind = LocalConstraint::Kind::SumFloor;
        lc.floor_bound = l.at("floor").get<double>();
      } else if (kind == "simplex_eq") {
        lc.kind = LocalConstraint::Kind::SimplexEq;
      } else if (kind == "general_linear") {
        const auto& rows = l.at("A");
        Index nr = static_cast<Index>(rows.size());
        Index nc = nr > 0 ? static_cast<Index>(rows[0].size()) : 0;
        lc.kind = LocalConstraint::Kind::GeneralLinear;
        lc.A = Matrix(nr, nc);
        for (Index rr = 0; rr < nr; ++rr) {
          const auto& row = rows[static_cast<std::size_t>(rr)];
          if (static_cast<Index>(row.size()) != nc)
            throw DimensionMismatch("general_linear A rows must have equal length");
          for (Index cc = 0; cc < nc; ++cc)
            lc.A(rr, cc) = row[static_cast<std::size_t>(cc)].get<double>();
        }
        const auto& bv = l.at("b");
        lc.b = Vector(static_cast<Index>(bv.size()));
        for (std::size_t k = 0; k < bv.size(); ++k)
          lc.b[static_cast<Index>(k)] = bv[k].get<double>();
      } else {
        throw BadParams("local kind must be sum_cap, sum_floor, simplex_eq or general_linear");
      }
      prob.locals.push_back(std::move(lc));
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("malformed instance: ") + e.what());
  }
  return prob;
}

struct Instance {
  MooProblem problem;
  Json meta;  // free-form provenance block (generator kind, seed, tree shape)
};

inline void save_instance(const std::string& path, const Instance& inst) {
  Json j = to_json(inst.problem);
  if (!inst.meta.is_null()) j["meta"] = inst.meta;
  save_json_file(path, j);
}

inline Instance load_instance(const std::string& path) {
  Json j = load_json_file(path);
  Instance inst;
  inst.problem = problem_from_json(j);
  inst.meta = j.value("meta", Json());
  return inst;
}

// A tree instance round-trips through its generator parameters: the file
// carries the recipe, and regeneration is bit-exact for a fixed seed.
inline Json tree_meta(const BinaryTreeInstance& inst) {
  Json m;
  m["kind"] = "binary-tree";
  m["K"] = inst.K;
  m["seed"] = inst.seed;
  m["gamma"] = inst.opts.gamma;
  m["p_lo"] = inst.opts.p_lo;
  m["p_hi"] = inst.opts.p_hi;
  m["tight_base"] = inst.opts.tight_base;
  m["tight_step"] = inst.opts.tight_step;
  m["noise_sd"] = inst.opts.noise_sd;
  return m;
}

inline BinaryTreeInstance tree_from_meta(const Json& meta) {
  if (!meta.is_object() || meta.value("kind", std::string()) != "binary-tree")
    throw BadParams("instance meta does not describe a binary-tree instance");
  TreeOpts opts;
  opts.gamma = meta.value("gamma", opts.gamma);
  opts.p_lo = meta.value("p_lo", opts.p_lo);
  opts.p_hi = meta.value("p_hi", opts.p_hi);
  opts.tight_base = meta.value("tight_base", opts.tight_base);
  opts.tight_step = meta.value("tight_step", opts.tight_step);
  opts.noise_sd = meta.value("noise_sd", opts.noise_sd);
  return gen_binary_tree(meta.at("K").get<int>(), meta.at("seed").get<std::uint64_t>(), opts);
}

inline Json dag_to_json(const ConstraintDag& dag) {
  Json j;
  j["nodes"] = Json::array();
  for (const auto& node : dag.nodes) {
    Json n;
    n["id"] = node.id;
    n["level"] = node.level;
    n["members"] = node.members;
    n["n"] = node.sample_count;
    if (node.mean) {
      Json mean = Json::array();
      for (Index k = 0; k < node.mean->size(); ++k) mean.push_back((*node.mean)[k]);
      n["mean"] = std::move(mean);
    }
    if (node.cov) {
      Json cov = Json::array();
      for (Index rr = 0; rr < node.cov->rows(); ++rr) {
        Json row = Json::array();
        for (Index cc = 0; cc < node.cov->cols(); ++cc) row.push_back((*node.cov)(rr, cc));
        cov.push_back(std::move(row));
      }
      n["cov"] = std::move(cov);
    }
    if (node.time_estimate) n["time"] = *node.time_estimate;
    j["nodes"].push_back(std::move(n));
  }
  j["edges"] = Json::array();
  for (const auto& e : dag.edges) j["edges"].push_back(Json::array({e.first, e.second}));
  j["root"] = dag.root;
  return j;
}

// CSV with a manifest back-reference on the first line. All numeric cells go
// through fmt_double so a rerun with the same inputs is byte-identical.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& manifest_hash,
            const std::vector<std::string>& columns) {
    out_.open(path);
    if (!out_) throw InputError("cannot write " + path);
    out_ << "# manifest: " << manifest_hash << "\n";
    write_cells(columns);
  }

  void row(const std::vector<std::string>& cells) { write_cells(cells); }

  static std::string cell(double v) { return fmt_double(v); }
  static std::string cell(int v) { return std::to_string(v); }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out_ << ",";
      out_ << cells[k];
    }
    out_ << "\n";
  }

  std::ofstream out_;
};

struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;  // sorted key/value
  std::string config_hash;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  Json diagnostics;
};

// The hash covers everything that determines the outputs: command, flags,
// seed, thread count. Timestamps stay out of it and out of the CSVs.
inline std::string config_hash_of(const std::string& command,
                                  const std::vector<std::pair<std::string, std::string>>& config) {
  std::string canon = command;
  for (const auto& kv : config) canon += "\n" + kv.first + "=" + kv.second;
  return hex64(fnv1a(canon));
}

inline void save_manifest(const std::string& path, const RunManifest& man) {
  Json j;
  j["command"] = man.command;
  Json cfg = Json::object();
  for (const auto& kv : man.config) cfg[kv.first] = kv.second;
  j["config"] = std::move(cfg);
  j["config_hash"] = man.config_hash;
  j["started"] = man.started;
  j["finished"] = man.finished;
  j["outputs"] = man.outputs;
  if (!man.diagnostics.is_null()) j["diagnostics"] = man.diagnostics;
  save_json_file(path, j);
}

inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace mooqp
