#pragma once

#include <string>
#include <vector>

#include "navgen/roadnet.hpp"
#include "navgen/search.hpp"
#include "navgen/trajectory.hpp"

// Trajectory persistence and ingestion filters.
//
// Trajectory file: one JSON record per line, [traj_id, [[segment_id,
// unix_seconds], ...]]. OD request file: CSV `r_org,t_org,r_dest` with a
// header row.

namespace navgen {

std::vector<Trajectory> load_trajectories(const std::string& path);
void save_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path);

enum class RejectReason { kept, too_short, has_loop, long_gap };

// The three ingestion filters: fewer than `min_points` points, any
// repeated segment, or a time gap above `max_gap_min`. Checked in that
// order; the first violation wins.
RejectReason filter_reason(const Trajectory& traj, int min_points = 5, double max_gap_min = 15.0);

struct FilterReport {
  int64_t kept = 0;
  int64_t too_short = 0;
  int64_t has_loop = 0;
  int64_t long_gap = 0;
  void save_csv(const std::string& path) const;
};

struct SplitResult {
  std::vector<Trajectory> train, val, test;
  FilterReport report;
};

// Filters, shuffles by seed, then splits by the given ratios (test takes
// the remainder). Sizes land within one trajectory of the exact ratios.
SplitResult validate_and_split(const std::vector<Trajectory>& trajectories, double train_ratio,
                               double val_ratio, uint64_t seed, int min_points = 5,
                               double max_gap_min = 15.0);

// Throws a data error when a trajectory references unknown segments,
// breaks reachability between consecutive points, or has decreasing
// timestamps.
void validate_against_network(const Trajectory& traj, const RoadNetwork& net);

std::vector<GenRequest> load_requests(const std::string& path);
void save_requests(const std::vector<GenRequest>& requests, const std::string& path);

}  // namespace navgen
