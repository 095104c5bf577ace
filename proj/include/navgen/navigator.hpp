#pragma once

#include <cstdint>
#include <vector>

#include "navgen/config.hpp"
#include "navgen/params.hpp"
#include "navgen/roadnet.hpp"
#include "navgen/tape.hpp"

// Destination-conditioned next-segment distribution and travel-time
// prediction: additive attention over the reachable candidate set with
// normalized distance/angle guidance features.

namespace navgen {

void register_navigator_params(ParamStore& store, const ModelConfig& cfg, Rng& rng);

// Normalized metric features toward the destination for one candidate:
// dhat = log1p(d(c,dest) - min over candidates), phihat = angle/pi;
// h = dhat*theta_d || phihat*theta_phi (length 2d).
Val metric_features(Tape& t, ParamBinding& p, const RoadNetwork& net, int32_t candidate,
                    int32_t r_dest, const std::vector<int32_t>& candidates);

struct CandidateDistribution {
  std::vector<int32_t> candidates;
  Val logits;     // length C
  Val log_probs;  // length C
  Val probs;      // length C
};

// Scores every candidate in R(r_i). `tau` is the 2d prefix representation,
// `roads` the |V| x d road matrix, `z_dest` the destination zone vector.
// Throws a data error when R(r_i) is empty (dead end).
CandidateDistribution next_segment_distribution(Tape& t, ParamBinding& p, const RoadNetwork& net,
                                                Val tau, Val roads, Val z_dest, int32_t r_i,
                                                int32_t r_dest, const ModelConfig& cfg);

// Strictly positive predicted interval in minutes for moving onto the
// candidate whose road vector is `v_candidate`.
Val predict_time_interval(Tape& t, ParamBinding& p, Val tau, Val v_candidate);

}  // namespace navgen
