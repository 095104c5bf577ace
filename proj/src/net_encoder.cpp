#include "navgen/net_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "navgen/geo.hpp"

namespace navgen {

Bucketizer Bucketizer::uniform(double lo, double hi, int count) {
  Bucketizer b;
  if (!(hi > lo)) hi = lo + 1e-9;
  b.edges.resize(count + 1);
  for (int i = 0; i <= count; ++i)
    b.edges[i] = lo + (hi - lo) * static_cast<double>(i) / count;
  return b;
}

Bucketizer Bucketizer::log_spaced(double lo, double hi, int count) {
  Bucketizer b;
  lo = std::max(lo, 1e-9);
  if (!(hi > lo)) hi = lo * (1.0 + 1e-9);
  const double llo = std::log(lo), lhi = std::log(hi);
  b.edges.resize(count + 1);
  for (int i = 0; i <= count; ++i)
    b.edges[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / count);
  return b;
}

int Bucketizer::bucket(double x) const {
  const int n = count();
  for (int i = 0; i < n; ++i)
    if (x <= edges[i + 1]) return i;
  return n - 1;
}

int angle_bucket(double angle, int count) {
  const int b = static_cast<int>(std::floor(count * angle / geo::kPi));
  return std::min(count - 1, std::max(0, b));
}

EncoderIndex EncoderIndex::build(const RoadNetwork& net, const ModelConfig& cfg) {
  EncoderIndex idx;
  const int32_t n = net.size();

  double min_len = net.segment(0).length_m, max_len = min_len;
  int32_t max_type = 0;
  for (const RoadSegment& s : net.segments()) {
    min_len = std::min(min_len, s.length_m);
    max_len = std::max(max_len, s.length_m);
    if (s.road_type < 0) throw data_error("road type codes must be non-negative");
    max_type = std::max(max_type, s.road_type);
  }
  idx.type_count = max_type + 1;
  idx.len_bkt = Bucketizer::log_spaced(min_len, max_len, cfg.length_buckets);
  const BoundingBox& bb = net.bbox();
  idx.lon_bkt = Bucketizer::uniform(bb.min_lon, bb.max_lon, cfg.lonlat_buckets);
  idx.lat_bkt = Bucketizer::uniform(bb.min_lat, bb.max_lat, cfg.lonlat_buckets);

  idx.len_bucket.resize(n);
  idx.type_id.resize(n);
  idx.lon_bucket.resize(n);
  idx.lat_bucket.resize(n);
  for (int32_t i = 0; i < n; ++i) {
    const RoadSegment& s = net.segment(i);
    idx.len_bucket[i] = idx.len_bkt.bucket(s.length_m);
    idx.type_id[i] = s.road_type;
    idx.lon_bucket[i] = idx.lon_bkt.bucket(s.lon);
    idx.lat_bucket[i] = idx.lat_bkt.bucket(s.lat);
  }

  idx.offsets.push_back(0);
  for (int32_t i = 0; i < n; ++i) {
    std::set<int32_t> nbrs;
    nbrs.insert(i);
    for (const Intersection* e : net.outgoing(i)) nbrs.insert(e->to);
    for (const Intersection* e : net.incoming(i)) nbrs.insert(e->from);
    for (int32_t j : nbrs) {
      bool reach = true;
      double angle = 0.0;
      if (j != i) {
        const Intersection* rec = net.find_record(i, j);
        if (rec == nullptr) rec = net.find_record(j, i);
        reach = rec->reachable;
        angle = rec->angle;
      }
      idx.entry_src.push_back(i);
      idx.entry_nbr.push_back(j);
      idx.entry_reach.push_back(reach ? 1 : 0);
      idx.entry_angle_bucket.push_back(angle_bucket(angle, cfg.angle_buckets));
    }
    idx.offsets.push_back(idx.entry_nbr.size());
  }
  return idx;
}

void register_net_encoder_params(ParamStore& store, const RoadNetwork& net,
                                 const EncoderIndex& idx, int zone_count, const ModelConfig& cfg,
                                 Rng& rng) {
  const size_t n = net.size();
  const size_t d = cfg.d;
  store.add("road.id_emb", normal_embedding(n, d / 2, rng));
  store.add("road.len_emb", normal_embedding(cfg.length_buckets, d / 8, rng));
  store.add("road.type_emb", normal_embedding(idx.type_count, d / 8, rng));
  store.add("road.lon_emb", normal_embedding(cfg.lonlat_buckets, d / 8, rng));
  store.add("road.lat_emb", normal_embedding(cfg.lonlat_buckets, d / 8, rng));
  store.add("inter.reach_emb", normal_embedding(2, d / 2, rng));
  store.add("inter.angle_emb", normal_embedding(cfg.angle_buckets, d / 2, rng));
  for (int l = 0; l < cfg.gat_layers; ++l) {
    const std::string base = "gat." + std::to_string(l) + ".";
    store.add(base + "theta_s", xavier_uniform(d, d, rng));
    store.add(base + "theta_t", xavier_uniform(d, d, rng));
    Array a = Array::zeros({d});
    for (double& x : a.data) x = rng.uniform(-std::sqrt(3.0 / d), std::sqrt(3.0 / d));
    store.add(base + "attn", std::move(a));
  }
  store.add("zone.id_emb", normal_embedding(zone_count, d, rng));
  for (int l = 0; l < cfg.zone_layers; ++l)
    store.add("zone." + std::to_string(l) + ".theta", xavier_uniform(d, d, rng));
  store.add("ablate.road_id", normal_embedding(n, d, rng));
}

Val road_embedding(Tape& t, ParamBinding& p, const EncoderIndex& idx, const ModelConfig& cfg) {
  (void)cfg;
  std::vector<int32_t> all_ids(idx.len_bucket.size());
  for (size_t i = 0; i < all_ids.size(); ++i) all_ids[i] = static_cast<int32_t>(i);
  return t.concat_cols({
      t.rows(p("road.id_emb"), all_ids),
      t.rows(p("road.len_emb"), idx.len_bucket),
      t.rows(p("road.type_emb"), idx.type_id),
      t.rows(p("road.lon_emb"), idx.lon_bucket),
      t.rows(p("road.lat_emb"), idx.lat_bucket),
  });
}

Val intersection_embedding(Tape& t, ParamBinding& p, bool reachable, double angle,
                           const ModelConfig& cfg) {
  Val reach_row = t.row(p("inter.reach_emb"), reachable ? 1 : 0);
  Val angle_row = t.row(p("inter.angle_emb"), angle_bucket(angle, cfg.angle_buckets));
  return t.concat({reach_row, angle_row});
}

Val gat_layer(Tape& t, ParamBinding& p, const EncoderIndex& idx, Val v, int layer,
              const ModelConfig& cfg) {
  const std::string base = "gat." + std::to_string(layer) + ".";
  Val theta_s = p(base + "theta_s");
  Val theta_t = p(base + "theta_t");
  Val attn = p(base + "attn");

  Val s = t.matmul(v, theta_s);
  Val tt = t.matmul(v, theta_t);
  Val s_i = t.rows(s, idx.entry_src);
  Val t_j = t.rows(tt, idx.entry_nbr);
  Val e_ij = t.concat_cols({
      t.rows(p("inter.reach_emb"), idx.entry_reach),
      t.rows(p("inter.angle_emb"), idx.entry_angle_bucket),
  });
  Val h = t.leaky_relu(t.add(t.add(s_i, t_j), e_ij), cfg.leaky_slope);
  Val logits = t.matvec(h, attn);
  Val alpha = t.group_softmax(logits, idx.offsets);
  return t.group_weighted_rows(alpha, tt, idx.entry_nbr, idx.offsets);
}

Val encode_roads(Tape& t, ParamBinding& p, const EncoderIndex& idx, const ModelConfig& cfg) {
  Val v = road_embedding(t, p, idx, cfg);
  for (int l = 0; l < cfg.gat_layers; ++l) v = gat_layer(t, p, idx, v, l, cfg);
  return v;
}

Array zone_norm_adjacency(const std::vector<std::vector<double>>& flow) {
  const size_t k = flow.size();
  double fmax = 0.0;
  for (const auto& row : flow)
    for (double x : row) {
      if (x < 0.0) throw data_error("flow matrix must be non-negative");
      fmax = std::max(fmax, x);
    }
  Array fhat = Array::mat(k, k);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j)
      fhat.at(i, j) = (fmax > 0.0 ? flow[i][j] / fmax : 0.0) + (i == j ? 1.0 : 0.0);
  std::vector<double> inv_sqrt_deg(k);
  for (size_t i = 0; i < k; ++i) {
    double deg = 0.0;
    for (size_t j = 0; j < k; ++j) deg += fhat.at(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Array m = Array::mat(k, k);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j)
      m.at(i, j) = inv_sqrt_deg[i] * fhat.at(i, j) * inv_sqrt_deg[j];
  return m;
}

Val zone_gcn_layer(Tape& t, Val z, Val theta, const Array& norm_adj) {
  return t.matmul(t.matmul(t.constant(norm_adj), z), theta);
}

Val encode_zones(Tape& t, ParamBinding& p, const Array& norm_adj, int zone_count,
                 const ModelConfig& cfg) {
  (void)zone_count;
  Val z = p("zone.id_emb");
  for (int l = 0; l < cfg.zone_layers; ++l)
    z = zone_gcn_layer(t, z, p("zone." + std::to_string(l) + ".theta"), norm_adj);
  return z;
}

}  // namespace navgen
