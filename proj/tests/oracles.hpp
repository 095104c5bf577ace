#pragma once

// Independent oracles used by the unit and acceptance tests. Everything
// here is deliberately written as plainly as possible (brute force,
// direct definitions) and must stay decoupled from the implementation
// paths it checks.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "navgen/array.hpp"
#include "navgen/params.hpp"
#include "navgen/rng.hpp"
#include "navgen/roadnet.hpp"

namespace oracles {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  bool ok(double rel_tol = 1e-4) const { return max_rel_err < rel_tol; }
};

// Central finite differences over every element of every parameter in
// the store, compared against the provided analytic gradients. An entry
// passes outright when |analytic - fd| <= abs_floor.
inline GradCheckReport finite_diff_check(
    navgen::ParamStore& store, const std::function<double(navgen::ParamStore&)>& loss_value,
    const std::map<std::string, navgen::Array>& analytic, double h = 1e-5,
    double abs_floor = 1e-7) {
  GradCheckReport rep;
  for (const std::string& name : store.names()) {
    navgen::Array& p = store.get(name);
    const navgen::Array& a = analytic.at(name);
    for (size_t i = 0; i < p.numel(); ++i) {
      const double keep = p.data[i];
      p.data[i] = keep + h;
      const double up = loss_value(store);
      p.data[i] = keep - h;
      const double dn = loss_value(store);
      p.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double err = std::fabs(a.data[i] - fd);
      if (err <= abs_floor) continue;
      const double rel = err / std::max(std::fabs(a.data[i]), std::fabs(fd));
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------
// Independent shortest-path oracle (scan-based, no heap) over edge
// weights, with ties broken by the lexicographically smaller node path.
// ---------------------------------------------------------------------

struct LexPathResult {
  bool reachable = false;
  double cost = 0.0;
  std::vector<int32_t> path;
};

// edges(u) must return (target, weight >= 0) pairs.
inline LexPathResult dijkstra_lex_oracle(
    int32_t n, const std::function<std::vector<std::pair<int32_t, double>>(int32_t)>& edges,
    int32_t org, int32_t dest) {
  struct Label {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<int32_t> path;
    bool settled = false;
    bool reached = false;
  };
  auto lex_less = [](const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
    const size_t k = std::min(a.size(), b.size());
    for (size_t i = 0; i < k; ++i)
      if (a[i] != b[i]) return a[i] < b[i];
    return a.size() < b.size();
  };

  std::vector<Label> labels(n);
  labels[org].cost = 0.0;
  labels[org].path = {org};
  labels[org].reached = true;

  for (;;) {
    int32_t u = -1;
    for (int32_t v = 0; v < n; ++v) {
      if (labels[v].settled || !labels[v].reached) continue;
      if (u == -1 || labels[v].cost < labels[u].cost ||
          (labels[v].cost == labels[u].cost && lex_less(labels[v].path, labels[u].path)))
        u = v;
    }
    if (u == -1) break;
    labels[u].settled = true;
    if (u == dest) break;
    for (const auto& [v, w] : edges(u)) {
      const double cand = labels[u].cost + w;
      std::vector<int32_t> cand_path = labels[u].path;
      cand_path.push_back(v);
      if (!labels[v].reached || cand < labels[v].cost ||
          (cand == labels[v].cost && lex_less(cand_path, labels[v].path))) {
        labels[v].reached = true;
        labels[v].cost = cand;
        labels[v].path = std::move(cand_path);
        labels[v].settled = false;
      }
    }
  }
  LexPathResult res;
  if (labels[dest].reached && labels[dest].settled) {
    res.reachable = true;
    res.cost = labels[dest].cost;
    res.path = labels[dest].path;
  }
  return res;
}

// Random strongly-random directed instance with a memoryless transition
// table, used by the search-vs-oracle comparisons.
struct MemorylessInstance {
  navgen::RoadNetwork net;
  // log probability per (node, successor index aligned with
  // net.reachable_successors(node))
  std::vector<std::vector<double>> log_p;
};

inline MemorylessInstance random_memoryless_instance(navgen::Rng& rng, int32_t max_nodes = 50) {
  const int32_t n = 5 + static_cast<int32_t>(rng.next_below(max_nodes - 4));
  std::vector<navgen::RoadSegment> segs;
  for (int32_t i = 0; i < n; ++i)
    segs.push_back({i, 100.0, 0, 0.001 * (i % 10), 0.001 * (i / 10)});
  std::vector<navgen::Intersection> ints;
  std::vector<std::vector<int32_t>> out(n);
  for (int32_t u = 0; u < n; ++u) {
    const int degree = 1 + static_cast<int>(rng.next_below(4));
    std::set<int32_t> targets;
    for (int k = 0; k < degree; ++k) {
      int32_t v = static_cast<int32_t>(rng.next_below(n));
      if (v == u) continue;
      if (targets.insert(v).second) ints.push_back({u, v, true, 0.0});
    }
    out[u].assign(targets.begin(), targets.end());
  }
  MemorylessInstance inst{navgen::RoadNetwork::from_parts(segs, ints), {}};
  inst.log_p.resize(n);
  for (int32_t u = 0; u < n; ++u) {
    const auto& succ = inst.net.reachable_successors(u);
    std::vector<double> counts(succ.size());
    double total = 0.0;
    for (double& c : counts) {
      c = 1.0 + static_cast<double>(rng.next_below(9));
      total += c;
    }
    for (double c : counts) inst.log_p[u].push_back(std::log(c / total));
  }
  return inst;
}

// ---------------------------------------------------------------------
// Brute-force similarity oracles (tiny inputs only).
// ---------------------------------------------------------------------

// Minimum over all monotone boundary-matched alignments, enumerated
// explicitly.
inline double dtw_bruteforce(const std::vector<std::vector<double>>& cost) {
  const size_t n = cost.size(), m = cost[0].size();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(size_t, size_t, double)> walk = [&](size_t i, size_t j, double acc) {
    acc += cost[i][j];
    if (acc >= best) return;
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

// Memoized recursion straight from the edit-distance-on-real-sequences
// definition; match(i, j) tells whether points i and j are within the
// spatial threshold.
inline double edr_recursive(size_t n, size_t m,
                            const std::function<bool(size_t, size_t)>& match) {
  std::map<std::pair<size_t, size_t>, double> memo;
  std::function<double(size_t, size_t)> rec = [&](size_t i, size_t j) -> double {
    if (i == 0) return static_cast<double>(j);
    if (j == 0) return static_cast<double>(i);
    auto it = memo.find({i, j});
    if (it != memo.end()) return it->second;
    const double subst = rec(i - 1, j - 1) + (match(i - 1, j - 1) ? 0.0 : 1.0);
    const double del = rec(i - 1, j) + 1.0;
    const double ins = rec(i, j - 1) + 1.0;
    const double r = std::min({subst, del, ins});
    memo[{i, j}] = r;
    return r;
  };
  return rec(n, m) / static_cast<double>(std::max(n, m));
}

// Definition-level Hausdorff: max over both directed nearest-point sweeps.
inline double hausdorff_bruteforce(const std::vector<std::vector<double>>& cost) {
  const size_t n = cost.size(), m = cost[0].size();
  double worst = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < m; ++j) nearest = std::min(nearest, cost[i][j]);
    worst = std::max(worst, nearest);
  }
  for (size_t j = 0; j < m; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) nearest = std::min(nearest, cost[i][j]);
    worst = std::max(worst, nearest);
  }
  return worst;
}

}  // namespace oracles
