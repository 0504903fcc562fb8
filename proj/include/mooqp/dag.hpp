#pragma once

// DAG over constraint subsets. Edges run from larger sets to strictly
// smaller ones under two rules: (i) proper containment with no set of
// intermediate level containing the child, or (ii) a shared element that
// appears in no set of intermediate level. Node moments propagate bottom-up
// through exact mixture formulas wherever children partition their parent,
// and the offline/online split is chosen by thresholding a time/variance
// score per node.

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/types.hpp"

namespace mooqp {

struct ConstraintNode {
  int id = -1;
  int level = 0;             // subset size
  std::vector<int> members;  // sorted ascending
  int sample_count = 0;      // rows behind the moment estimates
  std::optional<Vector> mean;
  std::optional<Matrix> cov;
  std::optional<double> time_estimate;  // seconds for a solve at this size
};

struct ConstraintDag {
  std::vector<ConstraintNode> nodes;
  std::vector<std::pair<int, int>> edges;  // (parent id, child id), sorted
  int root = -1;                           // full-set node when present

  std::vector<int> children_of(int id) const {
    std::vector<int> out;
    for (const auto& [p, c] : edges)
      if (p == id) out.push_back(c);
    return out;
  }
  std::vector<int> parents_of(int id) const {
    std::vector<int> out;
    for (const auto& [p, c] : edges)
      if (c == id) out.push_back(p);
    return out;
  }
};

struct DagBuildOptions {
  bool add_root = true;        // synthesize the full-set node when absent
  std::vector<int> universe;   // empty: union of all members
};

namespace detail {

inline bool contains_all(const std::vector<int>& big, const std::vector<int>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

inline bool contains(const std::vector<int>& s, int x) {
  return std::binary_search(s.begin(), s.end(), x);
}

}  // namespace detail

inline ConstraintDag build_dag(const std::vector<std::pair<int, std::vector<int>>>& subsets,
                               const DagBuildOptions& opts = {}) {
  ConstraintDag dag;
  for (const auto& [level, members] : subsets) {
    ConstraintNode node;
    node.id = static_cast<int>(dag.nodes.size());
    node.level = level;
    node.members = members;
    std::sort(node.members.begin(), node.members.end());
    if (std::adjacent_find(node.members.begin(), node.members.end()) != node.members.end())
      throw BadParams("build_dag: repeated member within one subset");
    if (level != static_cast<int>(node.members.size()))
      throw InconsistentLevel("build_dag: level does not equal the subset size");
    dag.nodes.push_back(std::move(node));
  }
  for (std::size_t i = 0; i < dag.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < dag.nodes.size(); ++j)
      if (dag.nodes[i].members == dag.nodes[j].members)
        throw BadParams("build_dag: duplicate subset");

  std::vector<int> universe = opts.universe;
  if (universe.empty()) {
    for (const auto& node : dag.nodes)
      universe.insert(universe.end(), node.members.begin(), node.members.end());
    std::sort(universe.begin(), universe.end());
    universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  } else {
    std::sort(universe.begin(), universe.end());
    for (const auto& node : dag.nodes)
      if (!detail::contains_all(universe, node.members))
        throw BadParams("build_dag: subset member outside the stated universe");
  }

  for (const auto& node : dag.nodes)
    if (node.members == universe) dag.root = node.id;
  if (opts.add_root && dag.root < 0 && !universe.empty()) {
    ConstraintNode root;
    root.id = static_cast<int>(dag.nodes.size());
    root.level = static_cast<int>(universe.size());
    root.members = universe;
    dag.root = root.id;
    dag.nodes.push_back(std::move(root));
  }

  // Edge rules, evaluated pairwise. "Intermediate level" means any set whose
  // level lies strictly between the two endpoints' levels.
  const auto& nodes = dag.nodes;
  for (const auto& hi : nodes) {
    for (const auto& lo : nodes) {
      if (lo.level >= hi.level) continue;
      auto intermediate = [&](const ConstraintNode& c) {
        return c.level > lo.level && c.level < hi.level;
      };
      bool edge = false;
      if (detail::contains_all(hi.members, lo.members)) {
        bool blocked = false;
        for (const auto& c : nodes)
          if (intermediate(c) && detail::contains_all(c.members, lo.members)) {
            blocked = true;
            break;
          }
        edge = !blocked;
      }
      if (!edge) {
        for (int x : lo.members) {
          if (!detail::contains(hi.members, x)) continue;
          bool shadowed = false;
          for (const auto& c : nodes)
            if (intermediate(c) && detail::contains(c.members, x)) {
              shadowed = true;
              break;
            }
          if (!shadowed) {
            edge = true;
            break;
          }
        }
      }
      if (edge) dag.edges.emplace_back(hi.id, lo.id);
    }
  }
  std::sort(dag.edges.begin(), dag.edges.end());
  return dag;
}

struct MixtureComponent {
  double alpha = 0.0;
  Vector mean;
  Matrix cov;
};

/// Exact moments of a mixture: mean_p = sum alpha_i mean_i and
/// cov_p = sum alpha_i (cov_i + (mean_i - mean_p)(mean_i - mean_p)').
inline std::pair<Vector, Matrix> mixture_moments(const std::vector<MixtureComponent>& children) {
  if (children.empty()) throw BadParams("mixture_moments: no components");
  double total = 0.0;
  for (const auto& c : children) {
    if (!(c.alpha > 0)) throw WeightsNotNormalized("mixture_moments: weights must be positive");
    total += c.alpha;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw WeightsNotNormalized("mixture_moments: weights must sum to 1");

  const Index dim = children.front().mean.size();
  Vector mean = Vector::Zero(dim);
  for (const auto& c : children) {
    if (c.mean.size() != dim || c.cov.rows() != dim || c.cov.cols() != dim)
      throw DimensionMismatch("mixture_moments: component shapes disagree");
    mean += c.alpha * c.mean;
  }
  Matrix cov = Matrix::Zero(dim, dim);
  for (const auto& c : children) {
    Vector d = c.mean - mean;
    cov += c.alpha * (c.cov + d * d.transpose());
  }
  return {mean, cov};
}

/// Fills every node's (mean, cov, sample_count) from per-member feature rows.
/// Nodes whose children exactly partition them are combined bottom-up with
/// the mixture formulas; everything else is computed directly. Covariances
/// are population-style (1/n), which makes the two paths agree exactly.
inline void attach_moments(ConstraintDag& dag, const Matrix& features) {
  auto direct = [&](ConstraintNode& node) {
    const Index f = features.cols();
    Vector mean = Vector::Zero(f);
    for (int u : node.members) {
      if (u < 0 || u >= features.rows())
        throw DimensionMismatch("attach_moments: member without a feature row");
      mean += features.row(u).transpose();
    }
    mean /= static_cast<double>(node.members.size());
    Matrix cov = Matrix::Zero(f, f);
    for (int u : node.members) {
      Vector d = features.row(u).transpose() - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(node.members.size());
    node.mean = mean;
    node.cov = cov;
    node.sample_count = static_cast<int>(node.members.size());
  };

  std::vector<int> order(dag.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dag.nodes[a].level != dag.nodes[b].level) return dag.nodes[a].level < dag.nodes[b].level;
    return a < b;
  });

  for (int id : order) {
    ConstraintNode& node = dag.nodes[id];
    std::vector<int> kids = dag.children_of(id);
    std::vector<int> pooled;
    for (int c : kids)
      pooled.insert(pooled.end(), dag.nodes[c].members.begin(), dag.nodes[c].members.end());
    std::sort(pooled.begin(), pooled.end());
    bool partitions = !kids.empty() && pooled == node.members;
    if (partitions) {
      std::vector<MixtureComponent> comps;
      comps.reserve(kids.size());
      for (int c : kids) {
        const ConstraintNode& k = dag.nodes[c];
        comps.push_back({static_cast<double>(k.members.size()) /
                             static_cast<double>(node.members.size()),
                         *k.mean, *k.cov});
      }
      auto [mean, cov] = mixture_moments(comps);
      node.mean = std::move(mean);
      node.cov = std::move(cov);
      node.sample_count = static_cast<int>(node.members.size());
    } else {
      direct(node);
    }
  }
}

/// Power-law solve-time model t(n) = coeff * n^expo. The defaults are pinned
/// constants so experiment outputs stay reproducible; fit_time_model refits
/// them from measured (size, seconds) pairs when calibration is wanted.
struct TimeModel {
  double coeff = 2e-6;
  double expo = 1.4;
  double at(double n) const { return coeff * std::pow(std::max(n, 1.0), expo); }
};

inline TimeModel fit_time_model(const std::vector<std::pair<double, double>>& measured) {
  if (measured.size() < 2) throw BadParams("fit_time_model: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, t] : measured) {
    if (!(n > 0) || !(t > 0)) throw BadParams("fit_time_model: sizes and times must be positive");
    double lx = std::log(n), ly = std::log(t);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double m = static_cast<double>(measured.size());
  double denom = m * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) throw BadParams("fit_time_model: degenerate sizes");
  TimeModel model;
  model.expo = (m * sxy - sx * sy) / denom;
  model.coeff = std::exp((sy - model.expo * sx) / m);
  return model;
}

inline void attach_time_estimates(ConstraintDag& dag, const TimeModel& model = {}) {
  for (auto& node : dag.nodes)
    node.time_estimate = model.at(static_cast<double>(node.members.size()));
}

/// Nodes whose offline dual estimate is NOT trusted: visiting top-down from
/// the root, a node lands in the stage-2 set when its time/variance score
/// w/t(n) + (1-w) lambda_max(cov/n) stays within beta. Returned in visit
/// order (level descending, id ascending).
inline std::vector<int> select_stage2(const ConstraintDag& dag, double w, double beta) {
  if (!(w >= 0.0 && w <= 1.0)) throw BadParams("select_stage2: w must lie in [0,1]");
  if (!(beta > 0)) throw BadParams("select_stage2: beta must be positive");

  std::vector<int> start;
  if (dag.root >= 0) {
    start.push_back(dag.root);
  } else {
    for (const auto& node : dag.nodes)
      if (dag.parents_of(node.id).empty()) start.push_back(node.id);
  }
  std::vector<char> seen(dag.nodes.size(), 0);
  std::vector<int> stack = start;
  for (int id : stack) seen[id] = 1;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    for (int c : dag.children_of(id))
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
  }
  // Edges strictly decrease level, so level-descending order is topological.
  std::vector<int> visited;
  for (std::size_t i = 0; i < dag.nodes.size(); ++i)
    if (seen[i]) visited.push_back(static_cast<int>(i));
  std::sort(visited.begin(), visited.end(), [&](int a, int b) {
    if (dag.nodes[a].level != dag.nodes[b].level) return dag.nodes[a].level > dag.nodes[b].level;
    return a < b;
  });

  std::vector<int> out;
  for (int id : visited) {
    const ConstraintNode& node = dag.nodes[id];
    if (!node.mean || !node.cov || !node.time_estimate || node.sample_count < 1)
      throw MissingMoments("select_stage2: node " + std::to_string(id) +
                           " lacks moments or a time estimate");
    double lam = 0.0;
    if (w < 1.0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(*node.cov / static_cast<double>(node.sample_count));
      lam = eig.eigenvalues().maxCoeff();
    }
    double score = w / *node.time_estimate + (1.0 - w) * lam;
    if (score <= beta) out.push_back(id);
  }
  return out;
}

}  // namespace mooqp
