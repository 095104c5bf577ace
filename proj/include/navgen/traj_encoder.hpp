#pragma once

#include <span>
#include <utility>
#include <vector>

#include "navgen/config.hpp"
#include "navgen/params.hpp"
#include "navgen/roadnet.hpp"
#include "navgen/tape.hpp"
#include "navgen/trajectory.hpp"

// Spatio-temporal point representation and the causal trajectory
// transformer with relative spatio-temporal position encodings.

namespace navgen {

// Pairwise constants for a point sequence: great-circle distances (km)
// between segment midpoints and absolute time gaps (minutes).
struct PairwiseIntervals {
  Array dist_km;  // n x n
  Array dt_min;   // n x n
};
PairwiseIntervals pairwise_intervals(const RoadNetwork& net, std::span<const TrajPoint> pts);

double minutes_of_day(double time_s);

void register_traj_encoder_params(ParamStore& store, const ModelConfig& cfg, Rng& rng);

// spatial = v_r + sigmoid(gate(v_r || z)) * z; temporal = Fourier features
// of the time of day with unit-norm-by-construction scaling; x = spatial || temporal.
Val point_representation(Tape& t, ParamBinding& p, Val v_road, Val z_zone, double time_minutes,
                         const ModelConfig& cfg);

// Relative encodings for one (layer, head): a^k = d*theta_d^k || dt*theta_t^k
// and the value-side pair built from the value projections.
std::pair<Val, Val> relative_encoding(Tape& t, ParamBinding& p, int layer, int head, double d_km,
                                      double dt_min, const ModelConfig& cfg);

// One attention head over normalized inputs xn (n x 2d): causal softmax
// of scaled content+relative logits, value rows plus relative values.
// Exposed separately so small cases can be checked by hand.
struct AttentionHeadOut {
  Val alpha;   // n x n, rows sum to 1 over j <= i
  Val output;  // n x head_dim
};
AttentionHeadOut attention_head(Tape& t, ParamBinding& p, int layer, int head, Val xn, Val dist,
                                Val dt, const std::vector<uint8_t>& causal,
                                const ModelConfig& cfg);

// Full causal encoder over stacked point representations (n x 2d).
// Returns the per-prefix outputs as an n x 2d matrix.
Val encode_trajectory(Tape& t, ParamBinding& p, const std::vector<Val>& points,
                      const PairwiseIntervals& iv, const ModelConfig& cfg);

}  // namespace navgen
