#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navgen/model.hpp"
#include "navgen/roadnet.hpp"
#include "navgen/trajectory.hpp"

// Best-first generation of the maximum-probability trajectory for an
// (origin, departure time, destination) triple: per-segment best known
// cumulative negative log-probability with a min-heap, stale-entry
// skipping, and deterministic tie-breaking.

namespace navgen {

struct PolicyStep {
  std::vector<int32_t> candidates;  // reachable successors, ascending
  std::vector<double> log_p;        // log probability per candidate
  std::vector<double> dt_minutes;   // predicted interval per candidate (> 0)
};

// Scores the next step for a partial trajectory and a destination.
using Policy = std::function<PolicyStep(std::span<const TrajPoint>, int32_t)>;

struct GenRequest {
  int32_t r_org = 0;
  double t_org_s = 0.0;
  int32_t r_dest = 0;
};

struct SearchLimits {
  // Maximum heap pops; 0 means the default of 50 * |V|.
  int64_t max_pops = 0;
};

struct SearchStats {
  int64_t pops = 0;
  int64_t expansions = 0;
  int64_t stale_skips = 0;
  bool success = false;
  std::vector<double> accepted_pop_costs;  // non-decreasing when the search is sound
};

// Runs the search; throws a generation error ("destination unreachable
// within budget", with expansion statistics) on heap exhaustion or
// budget excess. Equal-cost relaxations prefer the lexicographically
// smaller segment-id path.
Trajectory generate_trajectory(const Policy& policy, const RoadNetwork& net,
                               const GenRequest& request, const SearchLimits& limits = {},
                               SearchStats* stats = nullptr);

struct BatchResult {
  std::vector<std::optional<Trajectory>> trajectories;  // aligned with requests
  std::vector<std::string> errors;                      // empty string on success
  int64_t succeeded = 0;
};

// Independent searches, deterministic per request; `threads` > 1 runs
// requests concurrently against the shared frozen policy.
BatchResult generate_batch(const Policy& policy, const RoadNetwork& net,
                           const std::vector<GenRequest>& requests,
                           const SearchLimits& limits = {}, int threads = 1);

// Adapts a frozen model snapshot to the search policy interface.
Policy model_policy(const FrozenModel& frozen);

}  // namespace navgen
