#pragma once

#include <vector>

#include "navgen/rng.hpp"
#include "navgen/search.hpp"

// Reference generators: first-order Markov (greedy and search-wrapped),
// shortest-path, and a uniform random-walk control.

namespace navgen {

struct MarkovModel {
  // Transition probabilities aligned with net.reachable_successors(r);
  // add-one smoothing over R(r), so unseen states are uniform.
  std::vector<std::vector<double>> probs;
  // Mean observed minutes spent on a segment before moving; falls back
  // to the global mean for unseen segments.
  std::vector<double> dwell_minutes;
};

MarkovModel markov_fit(const std::vector<Trajectory>& trajectories, const RoadNetwork& net);

// Memoryless policy over R(r) for the search engine.
Policy markov_policy(const MarkovModel& model, const RoadNetwork& net);

// Greedy rollout to the destination; throws a generation error when the
// step cap (default 4*|V|, at least 64) is exceeded.
Trajectory markov_generate(const MarkovModel& model, const RoadNetwork& net,
                           const GenRequest& request, int64_t step_cap = 0);

// Best-first search with the Markov policy plugged in.
Trajectory markov_search_generate(const MarkovModel& model, const RoadNetwork& net,
                                  const GenRequest& request, const SearchLimits& limits = {},
                                  SearchStats* stats = nullptr);

// Minimum total segment-length path; timestamps from a constant
// synthetic speed (the duration column of reports flags this).
Trajectory dijkstra_generate(const RoadNetwork& net, const GenRequest& request,
                             double speed_kmh = 30.0);

// Uniform random walk control: walks until the destination or the step
// cap and returns the walk as-is (possibly not reaching the destination).
Trajectory random_walk_generate(const RoadNetwork& net, const GenRequest& request, Rng& rng,
                                int64_t step_cap = 0, double speed_kmh = 30.0);

}  // namespace navgen
