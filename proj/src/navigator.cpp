#include "navgen/navigator.hpp"

#include <cmath>

#include "navgen/geo.hpp"

namespace navgen {

void register_navigator_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const size_t d = cfg.d;
  store.add("nav.wq", xavier_uniform(3 * d, d, rng));
  store.add("nav.wk", xavier_uniform(3 * d, d, rng));
  {
    Array wv = Array::zeros({d});
    const double b = std::sqrt(3.0 / static_cast<double>(d));
    for (double& x : wv.data) x = rng.uniform(-b, b);
    store.add("nav.wv", std::move(wv));
  }
  for (const char* stem : {"nav.theta_d", "nav.theta_phi"}) {
    Array v = Array::zeros({d});
    const double b = std::sqrt(3.0 / static_cast<double>(d));
    for (double& x : v.data) x = rng.uniform(-b, b);
    store.add(stem, std::move(v));
  }
  store.add("nav.time.w1", xavier_uniform(3 * d, d, rng));
  store.add("nav.time.b1", Array::zeros({d}));
  {
    Array w2 = Array::zeros({d});
    const double b = std::sqrt(3.0 / static_cast<double>(d));
    for (double& x : w2.data) x = rng.uniform(-b, b);
    store.add("nav.time.w2", std::move(w2));
  }
  store.add("nav.time.b2", Array::zeros({1}));
}

namespace {

// dhat/phihat scalars for all candidates at once.
void guidance_scalars(const RoadNetwork& net, const std::vector<int32_t>& candidates,
                      int32_t r_dest, std::vector<double>* dhat, std::vector<double>* phihat) {
  double dmin = net.distance_km(candidates.front(), r_dest);
  for (int32_t c : candidates) dmin = std::min(dmin, net.distance_km(c, r_dest));
  dhat->resize(candidates.size());
  phihat->resize(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    (*dhat)[i] = std::log1p(net.distance_km(candidates[i], r_dest) - dmin);
    (*phihat)[i] = net.steering_angle(candidates[i], r_dest) / geo::kPi;
  }
}

}  // namespace

Val metric_features(Tape& t, ParamBinding& p, const RoadNetwork& net, int32_t candidate,
                    int32_t r_dest, const std::vector<int32_t>& candidates) {
  if (candidates.empty()) throw data_error("metric_features: empty candidate set");
  std::vector<double> dhat, phihat;
  guidance_scalars(net, candidates, r_dest, &dhat, &phihat);
  size_t pos = candidates.size();
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == candidate) pos = i;
  if (pos == candidates.size())
    throw data_error("metric_features: candidate not in candidate set");
  return t.concat({t.smul(p("nav.theta_d"), dhat[pos]), t.smul(p("nav.theta_phi"), phihat[pos])});
}

CandidateDistribution next_segment_distribution(Tape& t, ParamBinding& p, const RoadNetwork& net,
                                                Val tau, Val roads, Val z_dest, int32_t r_i,
                                                int32_t r_dest, const ModelConfig& cfg) {
  const std::vector<int32_t>& cands = net.reachable_successors(r_i);
  if (cands.empty())
    throw data_error("dead end: segment " + std::to_string(r_i) + " has no reachable successor");
  const size_t d = cfg.d;
  const size_t n_c = cands.size();

  Val query_in = cfg.disable_navigator
                     ? t.concat({tau, t.constant(Array::zeros({d}))})
                     : t.concat({tau, z_dest});
  Val q = t.vecmat(query_in, p("nav.wq"));

  Val v_c = t.rows(roads, cands);  // C x d
  Val h;
  if (cfg.disable_navigator) {
    h = t.constant(Array::mat(n_c, 2 * d));
  } else {
    std::vector<double> dhat, phihat;
    guidance_scalars(net, cands, r_dest, &dhat, &phihat);
    Val dhat_v = t.constant(Array::vec(std::move(dhat)));
    Val phihat_v = t.constant(Array::vec(std::move(phihat)));
    h = t.concat_cols(
        {t.outer(dhat_v, p("nav.theta_d")), t.outer(phihat_v, p("nav.theta_phi"))});
  }
  Val keys = t.matmul(t.concat_cols({v_c, h}), p("nav.wk"));  // C x d
  Val logits = t.matvec(t.tanh_(t.add_rowvec(keys, q)), p("nav.wv"));

  CandidateDistribution out;
  out.candidates = cands;
  out.logits = logits;
  out.log_probs = t.log_softmax_vec(logits);
  out.probs = t.softmax_vec(logits);
  return out;
}

Val predict_time_interval(Tape& t, ParamBinding& p, Val tau, Val v_candidate) {
  Val in = t.concat({tau, v_candidate});
  Val hidden = t.tanh_(t.add(t.vecmat(in, p("nav.time.w1")), p("nav.time.b1")));
  Val raw = t.add(t.dot(hidden, p("nav.time.w2")), t.pick(p("nav.time.b2"), 0));
  return t.softplus(raw);
}

}  // namespace navgen
