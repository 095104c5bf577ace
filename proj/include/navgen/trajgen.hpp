#pragma once

#include <functional>
#include <vector>

#include "navgen/rng.hpp"
#include "navgen/roadnet.hpp"
#include "navgen/trajectory.hpp"

// Synthetic trajectories from a softmax-perturbed shortest-path walk with
// speed-profile timestamps, resampled until the ingestion filters pass.

namespace navgen {

struct SynthPolicy {
  double beta = 1.0;                             // softmax temperature; 0 = exact argmax
  std::vector<double> speed_kmh = {30.0, 50.0};  // mean speed per road type
  double speed_noise = 0.1;                      // multiplicative, uniform in [1-x, 1+x]
  uint64_t seed = 0;
};

using OdSampler = std::function<std::pair<int32_t, int32_t>(Rng&)>;

// Uniform distinct origin/destination pairs.
OdSampler uniform_od_sampler(const RoadNetwork& net);

// Remaining shortest distance (km, segment lengths) from every segment to
// `dest`, +inf where unreachable. dist[dest] = 0; entering a segment
// costs its own length.
std::vector<double> remaining_distance_km(const RoadNetwork& net, int32_t dest);

// Per-trajectory protocol (index i draws from Rng(derive_seed(seed, i));
// the reimplementation oracle in the tests mirrors it exactly):
//   repeat until a trajectory passes the filters:
//     1. org <- sampler, dest <- sampler draw (uniform sampler: two
//        next_below(|V|) draws; equal or unreachable pairs restart)
//     2. walk from org: candidates are reachable successors with finite
//        remaining distance; score = -remaining_km; beta=0 takes the
//        argmax (ties to the smaller id), else sample with probability
//        proportional to exp((score - max score)/beta) using one
//        next_double per step; revisiting any segment aborts the attempt
//     3. reject walks shorter than 5 points
//     4. departure time: day start plus uniform(start_lo_h, start_hi_h)
//        hours (one next_double); each step then advances by
//        len_m/1000/speed_kmh*60 minutes times (1 + noise*(2u-1)) with
//        one next_double per step
struct SynthOptions {
  double start_lo_h = 6.0;
  double start_hi_h = 22.0;
  double day_start_unix_s = 1754784000.0;  // an arbitrary fixed midnight
  int min_points = 5;
};

std::vector<Trajectory> synth_trajectories(const RoadNetwork& net, int count,
                                           const SynthPolicy& policy,
                                           const SynthOptions& opt = {},
                                           const OdSampler& sampler = nullptr);

}  // namespace navgen
