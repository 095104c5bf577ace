#include "navgen/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "navgen/rng.hpp"

namespace navgen {

namespace {

// Undirected weighted graph used across coarsening levels. Node weights
// count original segments; edge weights count original adjacency pairs.
struct Graph {
  int32_t n = 0;
  std::vector<std::vector<std::pair<int32_t, double>>> adj;
  std::vector<int32_t> weight;
};

Graph base_graph(const RoadNetwork& net) {
  Graph g;
  g.n = net.size();
  g.adj.assign(g.n, {});
  g.weight.assign(g.n, 1);
  std::map<std::pair<int32_t, int32_t>, double> und;
  for (const Intersection& e : net.intersections()) {
    if (e.from == e.to) continue;
    auto key = std::minmax(e.from, e.to);
    und[{key.first, key.second}] = 1.0;
  }
  for (const auto& [pr, w] : und) {
    g.adj[pr.first].push_back({pr.second, w});
    g.adj[pr.second].push_back({pr.first, w});
  }
  for (auto& a : g.adj) std::sort(a.begin(), a.end());
  return g;
}

// Heavy-edge matching contraction. Returns the coarse graph and the
// fine-to-coarse node map; respects a per-node weight limit so coarse
// nodes stay packable under the balance cap.
bool coarsen(const Graph& g, int32_t max_node_weight, Rng& rng, Graph* out,
             std::vector<int32_t>* fine_to_coarse) {
  std::vector<int32_t> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::vector<int32_t> match(g.n, -1);
  for (int32_t u : order) {
    if (match[u] != -1) continue;
    int32_t best = -1;
    double best_w = -1.0;
    for (const auto& [v, w] : g.adj[u]) {
      if (match[v] != -1 || v == u) continue;
      if (g.weight[u] + g.weight[v] > max_node_weight) continue;
      if (w > best_w || (w == best_w && (best == -1 || v < best))) {
        best = v;
        best_w = w;
      }
    }
    if (best != -1) {
      match[u] = best;
      match[best] = u;
    } else {
      match[u] = u;
    }
  }

  std::vector<int32_t>& map = *fine_to_coarse;
  map.assign(g.n, -1);
  int32_t nc = 0;
  for (int32_t u = 0; u < g.n; ++u) {
    if (map[u] != -1) continue;
    map[u] = nc;
    if (match[u] != u) map[match[u]] = nc;
    ++nc;
  }
  if (nc >= g.n) return false;  // no contraction happened

  out->n = nc;
  out->weight.assign(nc, 0);
  out->adj.assign(nc, {});
  for (int32_t u = 0; u < g.n; ++u) out->weight[map[u]] += g.weight[u];
  std::map<std::pair<int32_t, int32_t>, double> und;
  for (int32_t u = 0; u < g.n; ++u) {
    for (const auto& [v, w] : g.adj[u]) {
      if (v <= u) continue;
      const int32_t cu = map[u], cv = map[v];
      if (cu == cv) continue;
      auto key = std::minmax(cu, cv);
      und[{key.first, key.second}] += w;
    }
  }
  for (const auto& [pr, w] : und) {
    out->adj[pr.first].push_back({pr.second, w});
    out->adj[pr.second].push_back({pr.first, w});
  }
  for (auto& a : out->adj) std::sort(a.begin(), a.end());
  return true;
}

// Greedy growing: each zone grows from a seed toward an even share of
// the remaining weight, preferring the most-connected frontier node.
std::vector<int32_t> initial_partition(const Graph& g, int32_t k, int32_t cap, Rng& rng) {
  std::vector<int32_t> zone(g.n, -1);
  std::vector<int64_t> load(k, 0);
  int64_t remaining = 0;
  for (int32_t w : g.weight) remaining += w;
  int32_t unassigned = g.n;

  std::vector<int32_t> seeds(g.n);
  std::iota(seeds.begin(), seeds.end(), 0);
  rng.shuffle(seeds);
  size_t seed_cursor = 0;

  for (int32_t z = 0; z < k; ++z) {
    const int32_t zones_left_after = k - z - 1;
    const int64_t target = (remaining + zones_left_after) / (zones_left_after + 1);

    while (seed_cursor < seeds.size() && zone[seeds[seed_cursor]] != -1) ++seed_cursor;
    if (seed_cursor >= seeds.size()) break;
    const int32_t seed = seeds[seed_cursor];

    // gain[u] = connection weight of unassigned u to this zone
    std::map<int32_t, double> gain;
    gain[seed] = 0.0;
    while (!gain.empty() && load[z] < target && unassigned > zones_left_after) {
      auto best = gain.begin();
      for (auto it = std::next(gain.begin()); it != gain.end(); ++it)
        if (it->second > best->second) best = it;
      const int32_t u = best->first;
      gain.erase(best);
      if (zone[u] != -1) continue;
      if (load[z] + g.weight[u] > cap) continue;
      zone[u] = z;
      load[z] += g.weight[u];
      remaining -= g.weight[u];
      --unassigned;
      for (const auto& [v, w] : g.adj[u])
        if (zone[v] == -1) gain[v] += w;
    }
  }

  // Leftovers: most-connected feasible zone, else the lightest (repaired
  // during refinement).
  for (int32_t u = 0; u < g.n; ++u) {
    if (zone[u] != -1) continue;
    std::vector<double> conn(k, 0.0);
    for (const auto& [v, w] : g.adj[u])
      if (zone[v] != -1) conn[zone[v]] += w;
    int32_t best = -1;
    for (int32_t z = 0; z < k; ++z) {
      if (load[z] + g.weight[u] > cap) continue;
      if (best == -1 || conn[z] > conn[best] || (conn[z] == conn[best] && load[z] < load[best]))
        best = z;
    }
    if (best == -1)
      best = static_cast<int32_t>(std::min_element(load.begin(), load.end()) - load.begin());
    zone[u] = best;
    load[best] += g.weight[u];
  }
  return zone;
}

void refine(const Graph& g, int32_t k, int32_t cap, Rng& rng, std::vector<int32_t>* zone_ptr) {
  std::vector<int32_t>& zone = *zone_ptr;
  std::vector<int64_t> load(k, 0);
  std::vector<int32_t> count(k, 0);
  for (int32_t u = 0; u < g.n; ++u) {
    load[zone[u]] += g.weight[u];
    count[zone[u]] += 1;
  }

  // Repair pass: drain overfull zones with the least-damaging moves.
  for (int32_t z = 0; z < k; ++z) {
    while (load[z] > cap) {
      int32_t move_u = -1, move_t = -1;
      double move_gain = 0.0;
      for (int32_t u = 0; u < g.n; ++u) {
        if (zone[u] != z || count[z] <= 1) continue;
        std::vector<double> conn(k, 0.0);
        for (const auto& [v, w] : g.adj[u]) conn[zone[v]] += w;
        for (int32_t t = 0; t < k; ++t) {
          if (t == z || load[t] + g.weight[u] > cap) continue;
          const double gain = conn[t] - conn[z];
          if (move_u == -1 || gain > move_gain) {
            move_u = u;
            move_t = t;
            move_gain = gain;
          }
        }
      }
      if (move_u == -1) break;  // cannot repair at this level
      load[z] -= g.weight[move_u];
      count[z] -= 1;
      load[move_t] += g.weight[move_u];
      count[move_t] += 1;
      zone[move_u] = move_t;
    }
  }

  std::vector<int32_t> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  for (int pass = 0; pass < 2; ++pass) {
    rng.shuffle(order);
    for (int32_t u : order) {
      const int32_t a = zone[u];
      if (count[a] <= 1) continue;
      std::vector<double> conn(k, 0.0);
      for (const auto& [v, w] : g.adj[u]) conn[zone[v]] += w;
      int32_t best = a;
      double best_gain = 0.0;
      for (const auto& [v, w] : g.adj[u]) {
        (void)w;
        const int32_t b = zone[v];
        if (b == a) continue;
        if (load[b] + g.weight[u] > cap) continue;
        const double gain = conn[b] - conn[a];
        if (gain > best_gain || (gain == best_gain && best != a && b < best)) {
          best = b;
          best_gain = gain;
        }
      }
      if (best != a && best_gain > 0.0) {
        load[a] -= g.weight[u];
        count[a] -= 1;
        load[best] += g.weight[u];
        count[best] += 1;
        zone[u] = best;
      }
    }
  }
}

}  // namespace

int32_t balance_cap(int32_t n, int32_t k, double epsilon) {
  const int32_t cap = static_cast<int32_t>(std::ceil((1.0 + epsilon) * n / k));
  const int32_t floor_cap = (n + k - 1) / k;
  return std::max(cap, floor_cap);
}

ZonePartition partition_zones(const RoadNetwork& net, int32_t k, double epsilon, uint64_t seed) {
  const int32_t n = net.size();
  if (k < 1 || k > n)
    throw config_error("zone count k must satisfy 1 <= k <= |V|; got k=" + std::to_string(k) +
                       ", |V|=" + std::to_string(n));

  ZonePartition part;
  part.k = k;
  part.flow.assign(k, std::vector<double>(k, 0.0));

  if (k == 1) {
    part.zone_of.assign(n, 0);
    return part;
  }
  if (k == n) {
    part.zone_of.resize(n);
    std::iota(part.zone_of.begin(), part.zone_of.end(), 0);
    return part;
  }

  const int32_t cap = balance_cap(n, k, epsilon);
  Rng rng(seed);

  std::vector<Graph> levels;
  std::vector<std::vector<int32_t>> maps;  // maps[i]: level i -> level i+1
  levels.push_back(base_graph(net));
  const int32_t coarse_limit = std::max(2 * k, 32);
  const int32_t max_node_weight = std::max(1, cap / 2);
  while (levels.back().n > coarse_limit) {
    Graph next;
    std::vector<int32_t> map;
    if (!coarsen(levels.back(), max_node_weight, rng, &next, &map)) break;
    if (next.n > static_cast<int32_t>(0.95 * levels.back().n)) break;
    levels.push_back(std::move(next));
    maps.push_back(std::move(map));
  }

  std::vector<int32_t> zone = initial_partition(levels.back(), k, cap, rng);
  refine(levels.back(), k, cap, rng, &zone);
  for (int level = static_cast<int>(levels.size()) - 2; level >= 0; --level) {
    std::vector<int32_t> finer(levels[level].n);
    for (int32_t u = 0; u < levels[level].n; ++u) finer[u] = zone[maps[level][u]];
    zone = std::move(finer);
    refine(levels[level], k, cap, rng, &zone);
  }

  // Contract check; the finest level has unit weights, so repair cannot
  // stall: a failure here is a bug, not an input condition.
  std::vector<int32_t> sizes(k, 0);
  for (int32_t z : zone) sizes[z] += 1;
  for (int32_t z = 0; z < k; ++z) {
    if (sizes[z] == 0) throw Error(ErrorKind::data, "internal: empty zone after refinement");
    if (sizes[z] > cap) throw Error(ErrorKind::data, "internal: zone over balance cap");
  }

  part.zone_of = std::move(zone);
  return part;
}

std::vector<std::vector<double>> zone_flow_matrix(const ZonePartition& partition,
                                                  const std::vector<Trajectory>& trajectories) {
  const int32_t k = partition.k;
  std::vector<std::vector<double>> f(k, std::vector<double>(k, 0.0));
  for (const Trajectory& t : trajectories) {
    for (size_t i = 1; i < t.points.size(); ++i) {
      const int32_t za = partition.zone_of.at(t.points[i - 1].segment);
      const int32_t zb = partition.zone_of.at(t.points[i].segment);
      if (za == zb) continue;
      f[za][zb] += 1.0;
      f[zb][za] += 1.0;
    }
  }
  return f;
}

int64_t partition_cut(const RoadNetwork& net, const std::vector<int32_t>& zone_of) {
  std::map<std::pair<int32_t, int32_t>, bool> seen;
  int64_t cut = 0;
  for (const Intersection& e : net.intersections()) {
    if (e.from == e.to) continue;
    auto key = std::minmax(e.from, e.to);
    if (seen.emplace(std::make_pair(key.first, key.second), true).second) {
      if (zone_of[key.first] != zone_of[key.second]) ++cut;
    }
  }
  return cut;
}

void save_partition(const ZonePartition& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write partition file: " + path);
  out << "k," << p.k << "\n";
  out << "segment_id,zone_id\n";
  for (size_t i = 0; i < p.zone_of.size(); ++i) out << i << ',' << p.zone_of[i] << '\n';
  if (!out) throw config_error("write failed: " + path);
}

ZonePartition load_partition(const std::string& path, const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open partition file: " + path);
  std::string line;
  int line_no = 0;
  ZonePartition p;
  p.zone_of.assign(net.size(), -1);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw data_error("partition line " + std::to_string(line_no) + ": expected two fields");
    if (a == "k") {
      p.k = std::stoi(b);
      continue;
    }
    if (a == "segment_id") continue;  // header
    const int32_t seg = std::stoi(a);
    const int32_t z = std::stoi(b);
    if (seg < 0 || seg >= net.size())
      throw data_error("partition line " + std::to_string(line_no) + ": unknown segment");
    p.zone_of[seg] = z;
  }
  if (p.k <= 0) throw data_error("partition file missing k row: " + path);
  for (size_t i = 0; i < p.zone_of.size(); ++i) {
    if (p.zone_of[i] < 0 || p.zone_of[i] >= p.k)
      throw data_error("segment " + std::to_string(i) + " lacks a valid zone assignment");
  }
  p.flow.assign(p.k, std::vector<double>(p.k, 0.0));
  return p;
}

}  // namespace navgen
