#include "navgen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "navgen/rng.hpp"

namespace navgen {

void TrainReport::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write train report: " + path);
  out << "epoch,train_loss,train_road_nll,train_time_mae,val_loss\n";
  out.precision(12);
  for (size_t e = 0; e < train_loss.size(); ++e)
    out << (e + 1) << ',' << train_loss[e] << ',' << train_lr[e] << ',' << train_lt[e] << ','
        << val_loss[e] << '\n';
}

StepLossNodes trajectory_loss(Tape& t, ParamBinding& p, const Model& model,
                              const Model::NetworkRepr& repr, const Trajectory& traj,
                              int32_t r_dest) {
  const auto& pts = traj.points;
  const size_t n = pts.size();
  if (n < 2) throw data_error("trajectory must have at least 2 points");

  // Prefixes x_{1:i} for i = 1..n-1 need only the first n-1 points.
  Val tau_matrix =
      model.encode_prefix(t, p, repr, std::span<const TrajPoint>(pts.data(), n - 1));

  std::vector<Val> nll_terms, mae_terms;
  for (size_t i = 1; i < n; ++i) {
    const int32_t r_i = pts[i - 1].segment;
    const int32_t truth = pts[i].segment;
    Val tau = t.row(tau_matrix, i - 1);
    CandidateDistribution dist = model.score_candidates(t, p, repr, tau, r_i, r_dest);
    size_t truth_idx = dist.candidates.size();
    for (size_t c = 0; c < dist.candidates.size(); ++c)
      if (dist.candidates[c] == truth) truth_idx = c;
    if (truth_idx == dist.candidates.size())
      throw data_error("trajectory " + std::to_string(traj.id) + ": segment " +
                       std::to_string(truth) + " is not reachable from " + std::to_string(r_i));
    nll_terms.push_back(t.neg(t.pick(dist.log_probs, truth_idx)));

    Val dt_hat = model.time_interval(t, p, repr, tau, truth);
    const double dt_true = (pts[i].time_s - pts[i - 1].time_s) / 60.0;
    mae_terms.push_back(t.abs_(t.sub(dt_hat, t.constant_scalar(dt_true))));
  }

  StepLossNodes out;
  out.road_nll = t.mean_all(t.concat(nll_terms));
  out.time_mae = t.mean_all(t.concat(mae_terms));
  out.total = t.add(out.road_nll, out.time_mae);
  return out;
}

StepLossValues step_loss(const Model& model, const Trajectory& traj, int32_t r_dest) {
  Tape t(false);
  ParamBinding p(t, const_cast<ParamStore&>(model.params()));
  Model::NetworkRepr repr = model.encode_network(t, p);
  StepLossNodes nodes = trajectory_loss(t, p, model, repr, traj, r_dest);
  return {t.val(nodes.total).data[0], t.val(nodes.road_nll).data[0],
          t.val(nodes.time_mae).data[0]};
}

double mean_loss(const Model& model, const std::vector<Trajectory>& set) {
  if (set.empty()) return 0.0;
  Tape t(false);
  ParamBinding p(t, const_cast<ParamStore&>(model.params()));
  Model::NetworkRepr repr = model.encode_network(t, p);
  double acc = 0.0;
  for (const Trajectory& traj : set) {
    StepLossNodes nodes = trajectory_loss(t, p, model, repr, traj, traj.points.back().segment);
    acc += t.val(nodes.total).data[0];
  }
  return acc / static_cast<double>(set.size());
}

AdamOptimizer::AdamOptimizer(ParamStore& store, double lr, double clip, double beta1,
                             double beta2, double eps)
    : store_(&store), lr_(lr), clip_(clip), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<std::pair<std::string, Array>>& grads) {
  double sq_norm = 0.0;
  for (const auto& [name, g] : grads) {
    (void)name;
    for (double x : g.data) sq_norm += x * x;
  }
  const double norm = std::sqrt(sq_norm);
  const double scale = norm > clip_ ? clip_ / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Array& p = store_->get(name);
    Array& m = m_.try_emplace(name, Array::zeros(p.shape)).first->second;
    Array& v = v_.try_emplace(name, Array::zeros(p.shape)).first->second;
    for (size_t i = 0; i < p.numel(); ++i) {
      const double gi = g.data[i] * scale;
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * gi;
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

Model train(const RoadNetwork& net, const ZonePartition& partition, const TrainConfig& cfg,
            const std::vector<Trajectory>& train_set, const std::vector<Trajectory>& val_set,
            TrainReport* report) {
  cfg.validate();
  if (train_set.empty()) throw data_error("training set is empty");

  Model model(net, partition, cfg.model, cfg.seed);
  model.set_flow(zone_flow_matrix(partition, train_set));

  AdamOptimizer opt(model.params(), cfg.learning_rate, cfg.grad_clip);
  Rng shuffler(derive_seed(cfg.seed, 0xBA7C4));

  TrainReport rep;
  ParamStore best_params;
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double epoch_loss = 0.0, epoch_lr = 0.0, epoch_lt = 0.0;
    size_t seen = 0;

    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      Tape t(true);
      ParamBinding p(t, model.params());
      Model::NetworkRepr repr = model.encode_network(t, p);

      std::vector<Val> totals;
      totals.reserve(end - begin);
      for (size_t k = begin; k < end; ++k) {
        const Trajectory& traj = train_set[order[k]];
        StepLossNodes nodes =
            trajectory_loss(t, p, model, repr, traj, traj.points.back().segment);
        totals.push_back(nodes.total);
        epoch_loss += t.val(nodes.total).data[0];
        epoch_lr += t.val(nodes.road_nll).data[0];
        epoch_lt += t.val(nodes.time_mae).data[0];
        ++seen;
      }
      Val batch_loss = t.mean_all(t.concat(totals));
      const double loss_value = t.val(batch_loss).data[0];
      if (!std::isfinite(loss_value))
        throw data_error("non-finite training loss at epoch " + std::to_string(epoch + 1));
      t.backward(batch_loss);

      std::vector<std::pair<std::string, Array>> grads;
      for (const auto& [name, val] : p.bound()) {
        (void)val;
        if (!is_trainable_param(name)) continue;
        grads.emplace_back(name, p.grad_of(name));
      }
      std::sort(grads.begin(), grads.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      opt.step(grads);
    }

    rep.train_loss.push_back(epoch_loss / seen);
    rep.train_lr.push_back(epoch_lr / seen);
    rep.train_lt.push_back(epoch_lt / seen);
    const double vloss = val_set.empty() ? epoch_loss / seen : mean_loss(model, val_set);
    rep.val_loss.push_back(vloss);
    if (vloss < best_val) {
      best_val = vloss;
      best_params = model.params();
    }
  }

  model.params() = best_params;
  if (report) *report = rep;
  return model;
}

}  // namespace navgen
