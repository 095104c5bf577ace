#pragma once

#include <cstdint>
#include <vector>

#include "navgen/config.hpp"
#include "navgen/params.hpp"
#include "navgen/partition.hpp"
#include "navgen/roadnet.hpp"
#include "navgen/tape.hpp"

// Road-level and zone-level representations: attribute/intersection
// embeddings, edge-featured graph attention over the segment graph, and
// flow-normalized convolution over the zone graph.

namespace navgen {

// Half-open bins (lo, hi]: an inner boundary value maps to the lower
// bucket; values beyond the ends clamp into the first/last bucket.
struct Bucketizer {
  std::vector<double> edges;  // count+1 ascending edges

  static Bucketizer uniform(double lo, double hi, int count);
  static Bucketizer log_spaced(double lo, double hi, int count);
  int bucket(double x) const;
  int count() const { return static_cast<int>(edges.size()) - 1; }
};

// floor(count * angle / pi), upper edge clamped into the last bucket.
int angle_bucket(double angle, int count);

// Network-derived constants shared by every forward pass: attribute
// bucket ids per segment and the attention entry list. Entries cover
// j in N(i) u {i} for each node i, where N(i) takes both directions of
// the intersection records; each entry carries the features of the
// (i,j) record when present, else of (j,i); self-loops use
// (reachable=true, angle=0).
struct EncoderIndex {
  std::vector<int32_t> len_bucket, type_id, lon_bucket, lat_bucket;
  int type_count = 0;

  std::vector<int32_t> entry_nbr;           // neighbor j per attention entry
  std::vector<int32_t> entry_src;           // attending node i per entry
  std::vector<int32_t> entry_reach;         // 0/1 feature row
  std::vector<int32_t> entry_angle_bucket;  // angle feature row
  std::vector<size_t> offsets;              // |V|+1 group bounds, groups ordered by node

  Bucketizer len_bkt, lon_bkt, lat_bkt;

  static EncoderIndex build(const RoadNetwork& net, const ModelConfig& cfg);
};

// Registers all road/zone encoder parameters (including when ablated, so
// the checkpoint layout is flag-independent).
void register_net_encoder_params(ParamStore& store, const RoadNetwork& net,
                                 const EncoderIndex& idx, int zone_count, const ModelConfig& cfg,
                                 Rng& rng);

// Row i = v_ID || v_len || v_type || v_lon || v_lat, widths (d/2, d/8 x4).
Val road_embedding(Tape& t, ParamBinding& p, const EncoderIndex& idx, const ModelConfig& cfg);

// Reachability row (d/2) || angle-bucket row (d/2) for a single record.
Val intersection_embedding(Tape& t, ParamBinding& p, bool reachable, double angle,
                           const ModelConfig& cfg);

// One graph-attention layer over the segment graph.
Val gat_layer(Tape& t, ParamBinding& p, const EncoderIndex& idx, Val v, int layer,
              const ModelConfig& cfg);

// Full road-level stack: embeddings then `gat_layers` attention layers.
Val encode_roads(Tape& t, ParamBinding& p, const EncoderIndex& idx, const ModelConfig& cfg);

// Normalized zone adjacency M = D^-1/2 (F/max(F) + I) D^-1/2.
Array zone_norm_adjacency(const std::vector<std::vector<double>>& flow);

// One zone convolution layer: M Z Theta.
Val zone_gcn_layer(Tape& t, Val z, Val theta, const Array& norm_adj);

// Full zone-level stack from the zone id table.
Val encode_zones(Tape& t, ParamBinding& p, const Array& norm_adj, int zone_count,
                 const ModelConfig& cfg);

}  // namespace navgen
