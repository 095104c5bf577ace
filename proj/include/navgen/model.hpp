#pragma once

#include <memory>
#include <span>
#include <string>

#include "navgen/config.hpp"
#include "navgen/navigator.hpp"
#include "navgen/net_encoder.hpp"
#include "navgen/params.hpp"
#include "navgen/partition.hpp"
#include "navgen/roadnet.hpp"
#include "navgen/traj_encoder.hpp"
#include "navgen/trajectory.hpp"

// Assembled model: road/zone encoders, trajectory encoder, and navigator,
// with one ParamStore holding every learnable array. Store entries under
// the "data." prefix are serialized constants (inter-zone flow), not
// learnable parameters.

namespace navgen {

inline bool is_trainable_param(const std::string& name) { return name.rfind("data.", 0) != 0; }

class Model {
 public:
  // Fresh model with seeded initialization.
  Model(const RoadNetwork& net, const ZonePartition& partition, ModelConfig cfg, uint64_t seed);

  // Restores a trained model (checkpoint written by save()).
  static Model load(const RoadNetwork& net, const ZonePartition& partition,
                    const std::string& path);
  void save(const std::string& path) const;

  void set_flow(const std::vector<std::vector<double>>& flow);

  const RoadNetwork& net() const { return *net_; }
  const ZonePartition& partition() const { return *partition_; }
  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const EncoderIndex& index() const { return index_; }

  struct NetworkRepr {
    Val roads;  // |V| x d
    Val zones;  // k x d
  };

  // Road and zone representations for the current parameters. Recomputed
  // per tape (training recomputes per optimization step; generation
  // freezes one copy).
  NetworkRepr encode_network(Tape& t, ParamBinding& p) const;

  // Per-prefix representations for a point sequence: row i encodes
  // x_{1..i+1}; an n x 2d matrix.
  Val encode_prefix(Tape& t, ParamBinding& p, const NetworkRepr& repr,
                    std::span<const TrajPoint> pts) const;

  // Candidate distribution over R(r_i) conditioned on prefix repr `tau`
  // and the destination.
  CandidateDistribution score_candidates(Tape& t, ParamBinding& p, const NetworkRepr& repr,
                                         Val tau, int32_t r_i, int32_t r_dest) const;

  // Predicted interval (minutes) for moving onto `candidate`.
  Val time_interval(Tape& t, ParamBinding& p, const NetworkRepr& repr, Val tau,
                    int32_t candidate) const;

 private:
  Model(const RoadNetwork& net, const ZonePartition& partition, ModelConfig cfg);

  const RoadNetwork* net_;
  const ZonePartition* partition_;
  ModelConfig cfg_;
  EncoderIndex index_;
  ParamStore store_;
  Array norm_adj_;  // zone convolution operator derived from the flow
};

// Parameter snapshot with precomputed network representations; the
// policy surface consumed by the trajectory search.
class FrozenModel {
 public:
  explicit FrozenModel(const Model& model);

  struct StepScores {
    std::vector<int32_t> candidates;
    std::vector<double> log_p;
    std::vector<double> dt_minutes;
  };

  // Scores R(last prefix segment); prefix longer than the configured
  // window is truncated to its most recent points.
  StepScores score_step(std::span<const TrajPoint> prefix, int32_t r_dest) const;

 private:
  const Model* model_;
  Array roads_;
  Array zones_;
};

}  // namespace navgen
