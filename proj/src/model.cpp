#include "navgen/model.hpp"

#include <json.hpp>

namespace navgen {

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["d"] = d;
  j["gat_layers"] = gat_layers;
  j["zone_layers"] = zone_layers;
  j["traj_layers"] = traj_layers;
  j["heads"] = heads;
  j["leaky_slope"] = leaky_slope;
  j["literal_dk_scale"] = literal_dk_scale;
  j["window"] = window;
  j["disable_road_encoder"] = disable_road_encoder;
  j["disable_traj_encoder"] = disable_traj_encoder;
  j["disable_navigator"] = disable_navigator;
  j["length_buckets"] = length_buckets;
  j["lonlat_buckets"] = lonlat_buckets;
  j["angle_buckets"] = angle_buckets;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json) {
  nlohmann::json j = nlohmann::json::parse(json);
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.gat_layers = j.at("gat_layers").get<int>();
  c.zone_layers = j.at("zone_layers").get<int>();
  c.traj_layers = j.at("traj_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.literal_dk_scale = j.at("literal_dk_scale").get<bool>();
  c.window = j.at("window").get<int>();
  c.disable_road_encoder = j.at("disable_road_encoder").get<bool>();
  c.disable_traj_encoder = j.at("disable_traj_encoder").get<bool>();
  c.disable_navigator = j.at("disable_navigator").get<bool>();
  c.length_buckets = j.at("length_buckets").get<int>();
  c.lonlat_buckets = j.at("lonlat_buckets").get<int>();
  c.angle_buckets = j.at("angle_buckets").get<int>();
  c.validate();
  return c;
}

Model::Model(const RoadNetwork& net, const ZonePartition& partition, ModelConfig cfg)
    : net_(&net), partition_(&partition), cfg_(cfg), index_(EncoderIndex::build(net, cfg)) {
  cfg_.validate();
  if (static_cast<int32_t>(partition.zone_of.size()) != net.size())
    throw config_error("partition does not cover the network");
}

Model::Model(const RoadNetwork& net, const ZonePartition& partition, ModelConfig cfg,
             uint64_t seed)
    : Model(net, partition, cfg) {
  Rng rng(seed);
  register_net_encoder_params(store_, net, index_, partition.k, cfg_, rng);
  register_traj_encoder_params(store_, cfg_, rng);
  register_navigator_params(store_, cfg_, rng);
  store_.add("data.zone_flow", Array::mat(partition.k, partition.k));
  set_flow(partition.flow.empty()
               ? std::vector<std::vector<double>>(partition.k, std::vector<double>(partition.k))
               : partition.flow);
}

void Model::set_flow(const std::vector<std::vector<double>>& flow) {
  if (static_cast<int32_t>(flow.size()) != partition_->k)
    throw config_error("flow matrix size does not match zone count");
  Array& stored = store_.get("data.zone_flow");
  for (int32_t i = 0; i < partition_->k; ++i)
    for (int32_t j = 0; j < partition_->k; ++j) stored.at(i, j) = flow[i][j];
  norm_adj_ = zone_norm_adjacency(flow);
}

void Model::save(const std::string& path) const { save_checkpoint(store_, cfg_.to_json(), path); }

Model Model::load(const RoadNetwork& net, const ZonePartition& partition,
                  const std::string& path) {
  std::string meta;
  ParamStore store = load_checkpoint(path, &meta);
  Model m(net, partition, ModelConfig::from_json(meta));
  const Array& flow = store.get("data.zone_flow");
  if (flow.rank() != 2 || static_cast<int32_t>(flow.rows()) != partition.k)
    throw data_error("checkpoint zone flow does not match the partition");
  m.store_ = std::move(store);
  std::vector<std::vector<double>> f(partition.k, std::vector<double>(partition.k));
  for (int32_t i = 0; i < partition.k; ++i)
    for (int32_t j = 0; j < partition.k; ++j) f[i][j] = m.store_.get("data.zone_flow").at(i, j);
  m.norm_adj_ = zone_norm_adjacency(f);
  const size_t expect = m.store_.get("road.id_emb").rows();
  if (expect != static_cast<size_t>(net.size()))
    throw data_error("checkpoint was trained on a different network size");
  return m;
}

Model::NetworkRepr Model::encode_network(Tape& t, ParamBinding& p) const {
  if (cfg_.disable_road_encoder) {
    return NetworkRepr{p("ablate.road_id"), p("zone.id_emb")};
  }
  return NetworkRepr{encode_roads(t, p, index_, cfg_),
                     encode_zones(t, p, norm_adj_, partition_->k, cfg_)};
}

Val Model::encode_prefix(Tape& t, ParamBinding& p, const NetworkRepr& repr,
                         std::span<const TrajPoint> pts) const {
  if (pts.empty()) throw data_error("encode_prefix: empty point sequence");
  std::vector<Val> xs;
  xs.reserve(pts.size());
  for (const TrajPoint& pt : pts) {
    Val v_r = t.row(repr.roads, pt.segment);
    Val z = t.row(repr.zones, partition_->zone_of[pt.segment]);
    xs.push_back(point_representation(t, p, v_r, z, minutes_of_day(pt.time_s), cfg_));
  }
  if (cfg_.disable_traj_encoder) {
    return t.matmul(t.stack_rows(xs), p("ablate.traj_proj"));
  }
  return encode_trajectory(t, p, xs, pairwise_intervals(*net_, pts), cfg_);
}

CandidateDistribution Model::score_candidates(Tape& t, ParamBinding& p, const NetworkRepr& repr,
                                              Val tau, int32_t r_i, int32_t r_dest) const {
  Val z_dest = t.row(repr.zones, partition_->zone_of[r_dest]);
  return next_segment_distribution(t, p, *net_, tau, repr.roads, z_dest, r_i, r_dest, cfg_);
}

Val Model::time_interval(Tape& t, ParamBinding& p, const NetworkRepr& repr, Val tau,
                         int32_t candidate) const {
  return predict_time_interval(t, p, tau, t.row(repr.roads, candidate));
}

FrozenModel::FrozenModel(const Model& model) : model_(&model) {
  Tape t(false);
  ParamBinding p(t, const_cast<ParamStore&>(model.params()));
  Model::NetworkRepr repr = model.encode_network(t, p);
  roads_ = t.val(repr.roads);
  zones_ = t.val(repr.zones);
}

FrozenModel::StepScores FrozenModel::score_step(std::span<const TrajPoint> prefix,
                                                int32_t r_dest) const {
  if (prefix.empty()) throw data_error("score_step: empty prefix");
  const size_t window = static_cast<size_t>(model_->config().window);
  if (prefix.size() > window) prefix = prefix.subspan(prefix.size() - window);

  Tape t(false);
  ParamBinding p(t, const_cast<ParamStore&>(model_->params()));
  Model::NetworkRepr repr{t.constant(roads_), t.constant(zones_)};
  Val tau_matrix = model_->encode_prefix(t, p, repr, prefix);
  Val tau = t.row(tau_matrix, prefix.size() - 1);
  CandidateDistribution dist =
      model_->score_candidates(t, p, repr, tau, prefix.back().segment, r_dest);

  StepScores out;
  out.candidates = dist.candidates;
  out.log_p = t.val(dist.log_probs).data;
  out.dt_minutes.reserve(dist.candidates.size());
  for (int32_t c : dist.candidates)
    out.dt_minutes.push_back(t.val(model_->time_interval(t, p, repr, tau, c)).data[0]);
  return out;
}

}  // namespace navgen
