#include "navgen/traj_encoder.hpp"

#include <cmath>
#include <string>

namespace navgen {

namespace {

std::string lh(const char* stem, int layer, int head) {
  return "traj." + std::to_string(layer) + ".h" + std::to_string(head) + "." + stem;
}
std::string ln(const char* stem, int layer) {
  return "traj." + std::to_string(layer) + "." + stem;
}

}  // namespace

PairwiseIntervals pairwise_intervals(const RoadNetwork& net, std::span<const TrajPoint> pts) {
  const size_t n = pts.size();
  PairwiseIntervals iv;
  iv.dist_km = Array::mat(n, n);
  iv.dt_min = Array::mat(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      iv.dist_km.at(i, j) = net.distance_km(pts[i].segment, pts[j].segment);
      iv.dt_min.at(i, j) = std::fabs(pts[i].time_s - pts[j].time_s) / 60.0;
    }
  return iv;
}

double minutes_of_day(double time_s) {
  double m = std::fmod(time_s / 60.0, 1440.0);
  if (m < 0.0) m += 1440.0;
  return m;
}

void register_traj_encoder_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const size_t d = cfg.d;
  const size_t w = 2 * d;
  const size_t dh = cfg.head_dim();
  const size_t rel = d / cfg.heads;

  {
    Array gate = Array::zeros({w});
    const double bound = std::sqrt(6.0 / static_cast<double>(w + 1));
    for (double& x : gate.data) x = rng.uniform(-bound, bound);
    store.add("traj.gate_w", std::move(gate));
    store.add("traj.gate_b", Array::zeros({1}));
  }
  {
    // Geometric frequency ladder over the feature index.
    Array omega = Array::zeros({d / 2});
    for (size_t l = 0; l < d / 2; ++l)
      omega.data[l] = 1.0 / std::pow(10000.0, 2.0 * static_cast<double>(l + 1) / d);
    store.add("traj.omega", std::move(omega));
  }
  for (int l = 0; l < cfg.traj_layers; ++l) {
    for (int h = 0; h < cfg.heads; ++h) {
      store.add(lh("wq", l, h), xavier_uniform(w, dh, rng));
      store.add(lh("wk", l, h), xavier_uniform(w, dh, rng));
      store.add(lh("wv", l, h), xavier_uniform(w, dh, rng));
      const double rb = std::sqrt(3.0 / static_cast<double>(rel));
      for (const char* stem : {"rel_dk", "rel_tk", "rel_dv", "rel_tv"}) {
        Array v = Array::zeros({rel});
        for (double& x : v.data) x = rng.uniform(-rb, rb) * 0.1;
        store.add(lh(stem, l, h), std::move(v));
      }
    }
    Array g1 = Array::zeros({w});
    for (double& x : g1.data) x = 1.0;
    store.add(ln("ln1.g", l), g1);
    store.add(ln("ln1.b", l), Array::zeros({w}));
    store.add(ln("ff.w1", l), xavier_uniform(w, 4 * w, rng));
    store.add(ln("ff.b1", l), Array::zeros({4 * w}));
    store.add(ln("ff.w2", l), xavier_uniform(4 * w, w, rng));
    store.add(ln("ff.b2", l), Array::zeros({w}));
    Array g2 = g1;
    store.add(ln("ln2.g", l), g2);
    store.add(ln("ln2.b", l), Array::zeros({w}));
  }
  Array gf = Array::zeros({w});
  for (double& x : gf.data) x = 1.0;
  store.add("traj.final_ln.g", gf);
  store.add("traj.final_ln.b", Array::zeros({w}));
  store.add("ablate.traj_proj", xavier_uniform(w, w, rng));
}

Val point_representation(Tape& t, ParamBinding& p, Val v_road, Val z_zone, double time_minutes,
                         const ModelConfig& cfg) {
  Val gate_in = t.concat({v_road, z_zone});
  Val gate = t.sigmoid(t.add(t.dot(gate_in, p("traj.gate_w")), t.pick(p("traj.gate_b"), 0)));
  Val spatial = t.add(v_road, t.scale(gate, z_zone));

  Val phase = t.smul(p("traj.omega"), time_minutes);
  Val temporal = t.smul(t.concat({t.cos_(phase), t.sin_(phase)}),
                        std::sqrt(1.0 / (2.0 * cfg.d)));
  return t.concat({spatial, temporal});
}

std::pair<Val, Val> relative_encoding(Tape& t, ParamBinding& p, int layer, int head, double d_km,
                                      double dt_min, const ModelConfig& cfg) {
  (void)cfg;
  Val ak = t.concat({t.smul(p(lh("rel_dk", layer, head)), d_km),
                     t.smul(p(lh("rel_tk", layer, head)), dt_min)});
  Val av = t.concat({t.smul(p(lh("rel_dv", layer, head)), d_km),
                     t.smul(p(lh("rel_tv", layer, head)), dt_min)});
  return {ak, av};
}

AttentionHeadOut attention_head(Tape& t, ParamBinding& p, int layer, int head, Val xn, Val dist,
                                Val dt, const std::vector<uint8_t>& causal,
                                const ModelConfig& cfg) {
  const size_t dh = cfg.head_dim();
  const size_t rel = cfg.d / cfg.heads;
  const double inv_scale = cfg.literal_dk_scale
                               ? 1.0 / static_cast<double>(dh)
                               : 1.0 / std::sqrt(static_cast<double>(dh));
  Val q = t.matmul(xn, p(lh("wq", layer, head)));
  Val k = t.matmul(xn, p(lh("wk", layer, head)));
  Val v = t.matmul(xn, p(lh("wv", layer, head)));
  // q_i . a_ij^k decomposes into d_ij * (q_i[:rel] . theta_dk) + dt_ij * (q_i[rel:] . theta_tk)
  Val u = t.matvec(t.cols(q, 0, rel), p(lh("rel_dk", layer, head)));
  Val w = t.matvec(t.cols(q, rel, rel), p(lh("rel_tk", layer, head)));
  Val rel_logits = t.add(t.scale_rows(dist, u), t.scale_rows(dt, w));
  Val logits = t.smul(t.add(t.matmul(q, t.transpose(k)), rel_logits), inv_scale);
  Val alpha = t.masked_row_softmax(logits, causal);
  // sum_j alpha_ij a_ij^v = (sum_j alpha_ij d_ij) theta_dv || (sum_j alpha_ij dt_ij) theta_tv
  Val sd = t.row_sums(t.mul(alpha, dist));
  Val st = t.row_sums(t.mul(alpha, dt));
  Val rel_vals = t.concat_cols({t.outer(sd, p(lh("rel_dv", layer, head))),
                                t.outer(st, p(lh("rel_tv", layer, head)))});
  return {alpha, t.add(t.matmul(alpha, v), rel_vals)};
}

Val encode_trajectory(Tape& t, ParamBinding& p, const std::vector<Val>& points,
                      const PairwiseIntervals& iv, const ModelConfig& cfg) {
  const size_t n = points.size();
  if (n == 0) throw data_error("encode_trajectory: empty sequence");

  std::vector<uint8_t> causal(n * n, 0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j <= i; ++j) causal[i * n + j] = 1;

  Val dist = t.constant(iv.dist_km);
  Val dt = t.constant(iv.dt_min);

  Val x = t.stack_rows(points);  // n x 2d
  for (int l = 0; l < cfg.traj_layers; ++l) {
    Val xn = t.layer_norm(x, p(ln("ln1.g", l)), p(ln("ln1.b", l)));
    std::vector<Val> head_outs;
    for (int h = 0; h < cfg.heads; ++h)
      head_outs.push_back(attention_head(t, p, l, h, xn, dist, dt, causal, cfg).output);
    x = t.add(x, t.concat_cols(head_outs));

    Val fn = t.layer_norm(x, p(ln("ln2.g", l)), p(ln("ln2.b", l)));
    Val hidden = t.tanh_(t.add_rowvec(t.matmul(fn, p(ln("ff.w1", l))), p(ln("ff.b1", l))));
    Val ff = t.add_rowvec(t.matmul(hidden, p(ln("ff.w2", l))), p(ln("ff.b2", l)));
    x = t.add(x, ff);
  }
  return t.layer_norm(x, p("traj.final_ln.g"), p("traj.final_ln.b"));
}

}  // namespace navgen
