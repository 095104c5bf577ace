#pragma once

#include <string>
#include <vector>

#include "navgen/model.hpp"
#include "navgen/trajectory.hpp"

// Teacher-forced optimization of the full parameter set: negative
// log-likelihood of the true next segment plus mean-absolute-error of
// the predicted interval, averaged over trajectory steps.

namespace navgen {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  int epochs = 10;
  int batch_size = 32;
  double grad_clip = 1.0;
  uint64_t seed = 0;

  void validate() const {
    model.validate();
    if (learning_rate <= 0.0 || epochs <= 0 || batch_size <= 0 || grad_clip <= 0.0)
      throw config_error("training hyperparameters must be positive");
  }
};

struct TrainReport {
  std::vector<double> train_loss;  // per-epoch means
  std::vector<double> train_lr;
  std::vector<double> train_lt;
  std::vector<double> val_loss;

  bool operator==(const TrainReport&) const = default;
  void save_csv(const std::string& path) const;
};

struct StepLossNodes {
  Val total;
  Val road_nll;
  Val time_mae;
};

// Tape-level loss for one trajectory under a shared network encoding.
// Requires length >= 2 and every true next segment reachable.
StepLossNodes trajectory_loss(Tape& t, ParamBinding& p, const Model& model,
                              const Model::NetworkRepr& repr, const Trajectory& traj,
                              int32_t r_dest);

struct StepLossValues {
  double total = 0.0;
  double road_nll = 0.0;
  double time_mae = 0.0;
};

// Standalone evaluation on a fresh tape (fresh network encoding).
StepLossValues step_loss(const Model& model, const Trajectory& traj, int32_t r_dest);

// Adam with bias correction and global-norm gradient clipping. Exposed
// for tests; train() drives it.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore& store, double lr, double clip, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  // grads: one array per trainable name, aligned with store values.
  void step(const std::vector<std::pair<std::string, Array>>& grads);

 private:
  ParamStore* store_;
  double lr_, clip_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<std::string, Array> m_, v_;
};

// Full loop: computes the zone flow from the training set, runs
// mini-batch epochs, and returns the model restored to its best
// validation checkpoint. Deterministic for a fixed seed.
Model train(const RoadNetwork& net, const ZonePartition& partition, const TrainConfig& cfg,
            const std::vector<Trajectory>& train_set, const std::vector<Trajectory>& val_set,
            TrainReport* report);

// Mean step_loss over a set under one frozen encoding (validation).
double mean_loss(const Model& model, const std::vector<Trajectory>& set);

}  // namespace navgen
