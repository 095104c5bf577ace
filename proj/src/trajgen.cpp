#include "navgen/trajgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace navgen {

OdSampler uniform_od_sampler(const RoadNetwork& net) {
  const uint64_t n = static_cast<uint64_t>(net.size());
  return [n](Rng& rng) {
    const int32_t org = static_cast<int32_t>(rng.next_below(n));
    const int32_t dest = static_cast<int32_t>(rng.next_below(n));
    return std::make_pair(org, dest);
  };
}

std::vector<double> remaining_distance_km(const RoadNetwork& net, int32_t dest) {
  const int32_t n = net.size();
  std::vector<std::vector<int32_t>> preds(n);
  for (int32_t r = 0; r < n; ++r)
    for (int32_t s : net.reachable_successors(r)) preds[s].push_back(r);

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Entry = std::pair<double, int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  dist[dest] = 0.0;
  heap.push({0.0, dest});
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    const double enter_v = net.segment(v).length_m / 1000.0;
    for (int32_t u : preds[v]) {
      const double cand = d + enter_v;  // moving u -> v costs len(v)
      if (cand < dist[u]) {
        dist[u] = cand;
        heap.push({cand, u});
      }
    }
  }
  return dist;
}

namespace {

struct WalkResult {
  std::vector<int32_t> path;
  bool ok = false;
};

WalkResult walk(const RoadNetwork& net, int32_t org, int32_t dest,
                const std::vector<double>& remaining, double beta, Rng& rng) {
  WalkResult res;
  std::vector<uint8_t> visited(net.size(), 0);
  int32_t cur = org;
  visited[cur] = 1;
  res.path.push_back(cur);
  while (cur != dest) {
    std::vector<int32_t> cands;
    for (int32_t c : net.reachable_successors(cur))
      if (std::isfinite(remaining[c])) cands.push_back(c);
    if (cands.empty()) return res;

    int32_t chosen;
    if (beta <= 0.0) {
      chosen = cands[0];
      for (int32_t c : cands)
        if (remaining[c] < remaining[chosen]) chosen = c;
    } else {
      double best = remaining[cands[0]];
      for (int32_t c : cands) best = std::min(best, remaining[c]);
      std::vector<double> w(cands.size());
      double total = 0.0;
      for (size_t i = 0; i < cands.size(); ++i) {
        w[i] = std::exp(-(remaining[cands[i]] - best) / beta);
        total += w[i];
      }
      const double u = rng.next_double() * total;
      double acc = 0.0;
      size_t pick = cands.size() - 1;
      for (size_t i = 0; i < cands.size(); ++i) {
        acc += w[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
      chosen = cands[pick];
    }
    if (visited[chosen]) return res;  // would be rejected by the loop filter
    visited[chosen] = 1;
    res.path.push_back(chosen);
    cur = chosen;
  }
  res.ok = true;
  return res;
}

}  // namespace

std::vector<Trajectory> synth_trajectories(const RoadNetwork& net, int count,
                                           const SynthPolicy& policy, const SynthOptions& opt,
                                           const OdSampler& sampler) {
  if (count < 0) throw config_error("trajectory count must be non-negative");
  if (policy.beta < 0.0) throw config_error("beta must be >= 0");
  if (policy.speed_kmh.empty()) throw config_error("speed profile must not be empty");
  const OdSampler sample = sampler ? sampler : uniform_od_sampler(net);

  auto speed_for = [&](int32_t seg) {
    const int32_t type = net.segment(seg).road_type;
    const size_t idx = std::min<size_t>(type, policy.speed_kmh.size() - 1);
    return policy.speed_kmh[idx];
  };

  std::vector<Trajectory> out(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(policy.seed, static_cast<uint64_t>(i)));
    for (;;) {
      const auto [org, dest] = sample(rng);
      if (org == dest) continue;
      const std::vector<double> remaining = remaining_distance_km(net, dest);
      if (!std::isfinite(remaining[org])) continue;

      WalkResult w = walk(net, org, dest, remaining, policy.beta, rng);
      if (!w.ok || static_cast<int>(w.path.size()) < opt.min_points) continue;

      Trajectory traj;
      traj.id = i;
      double t = opt.day_start_unix_s +
                 rng.uniform(opt.start_lo_h, opt.start_hi_h) * 3600.0;
      traj.points.push_back({w.path[0], t});
      for (size_t s = 1; s < w.path.size(); ++s) {
        const int32_t seg = w.path[s];
        const double base_min = net.segment(seg).length_m / 1000.0 / speed_for(seg) * 60.0;
        const double factor = 1.0 + policy.speed_noise * (2.0 * rng.next_double() - 1.0);
        t += base_min * factor * 60.0;
        traj.points.push_back({seg, t});
      }
      out[i] = std::move(traj);
      break;
    }
  }
  return out;
}

}  // namespace navgen
