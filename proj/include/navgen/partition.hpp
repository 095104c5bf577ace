#pragma once

#include <cstdint>
#include <vector>

#include "navgen/roadnet.hpp"
#include "navgen/trajectory.hpp"

// K-way balanced partition of the road graph into zones, plus the
// inter-zone traffic flow matrix observed in training trajectories.

namespace navgen {

struct ZonePartition {
  int32_t k = 0;
  std::vector<int32_t> zone_of;           // segment id -> zone id
  std::vector<std::vector<double>> flow;  // k x k, symmetric, zero diagonal

  int32_t zone(int32_t segment) const { return zone_of[segment]; }
};

// Multilevel scheme: heavy-edge matching coarsening, greedy growing on
// the coarsest graph, then uncoarsening with boundary-move refinement.
// Guarantees: every segment in exactly one zone, every zone nonempty,
// max zone size <= ceil((1+epsilon)*|V|/k). Cut quality is best-effort.
// Deterministic for a given seed. The flow matrix is left zero.
ZonePartition partition_zones(const RoadNetwork& net, int32_t k, double epsilon, uint64_t seed);

// Symmetrized counts of consecutive trajectory steps crossing zones.
std::vector<std::vector<double>> zone_flow_matrix(const ZonePartition& partition,
                                                  const std::vector<Trajectory>& trajectories);

// Number of undirected adjacency pairs whose endpoints lie in different
// zones (each unordered pair counted once).
int64_t partition_cut(const RoadNetwork& net, const std::vector<int32_t>& zone_of);

// ceil((1+epsilon)*|V|/k)
int32_t balance_cap(int32_t n, int32_t k, double epsilon);

// Partition file: CSV with header `segment_id,zone_id` plus a leading
// `k,<count>` row.
void save_partition(const ZonePartition& p, const std::string& path);
ZonePartition load_partition(const std::string& path, const RoadNetwork& net);

}  // namespace navgen
