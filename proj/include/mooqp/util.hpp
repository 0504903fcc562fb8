#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace mooqp {

// Shortest round-trippable decimal form of a double. Used everywhere a real
// lands in a file so that reruns are byte-identical.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    double back = std::strtod(probe, nullptr);
    if (back == v || (v != v && back != back)) return probe;
  }
  return buf;
}

// FNV-1a, stable across builds and platforms; used for config hashes.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Per-repetition RNG stream: seed + rep index, so repetitions are independent
// of scheduling and thread count.
inline std::mt19937_64 rep_rng(std::uint64_t seed, std::uint64_t rep = 0) {
  return std::mt19937_64(seed + rep);
}

// Uniform in [0,1) built directly from generator bits. std::uniform_*
// distributions are implementation-specified, so anything that lands in a
// file goes through these instead.
inline double runif(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double runif(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * runif(g);
}

// Standard normal via Box-Muller on two uniform draws.
inline double rnorm(std::mt19937_64& g) {
  double u1 = runif(g), u2 = runif(g);
  if (u1 <= 0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Distinct indices drawn without replacement by a partial shuffle.
inline std::vector<int> sample_without_replacement(int population, int n, std::mt19937_64& g) {
  std::vector<int> idx(static_cast<std::size_t>(population));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < n; ++i) {
    std::uint64_t j = i + g() % static_cast<std::uint64_t>(population - i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(n));
  return idx;
}

// Runs fn(i) for i in [0, n). Work is sharded by index so results must be
// written into per-index slots by the caller; that keeps output independent
// of the thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

class Timer {
 public:
  Timer() : start_(clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }
  void reset() { start_ = clock::now(); }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population-style variance (1/n).
inline double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

inline std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size(), 0.0);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank for ties
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rx = ranks_of(x), ry = ranks_of(y);
  double mx = mean_of(rx), my = mean_of(ry);
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx <= 0 || dy <= 0) return 0.0;
  return num / std::sqrt(dx * dy);
}

// Pool-adjacent-violators fit of a non-decreasing sequence (least squares).
inline std::vector<double> isotonic_non_decreasing(const std::vector<double>& y) {
  std::vector<double> level;
  std::vector<double> weight;
  for (double v : y) {
    level.push_back(v);
    weight.push_back(1.0);
    while (level.size() >= 2 && level[level.size() - 2] > level.back()) {
      double w = weight[weight.size() - 2] + weight.back();
      double m = (level[level.size() - 2] * weight[weight.size() - 2] + level.back() * weight.back()) / w;
      level.pop_back();
      weight.pop_back();
      level.back() = m;
      weight.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t i = 0; i < level.size(); ++i)
    for (int k = 0; k < static_cast<int>(weight[i] + 0.5); ++k) out.push_back(level[i]);
  return out;
}

inline std::vector<double> isotonic_non_increasing(const std::vector<double>& y) {
  std::vector<double> neg(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
  auto fit = isotonic_non_decreasing(neg);
  for (auto& v : fit) v = -v;
  return fit;
}

}  // namespace mooqp
