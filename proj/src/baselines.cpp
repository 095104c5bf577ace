#include "navgen/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace navgen {

namespace {

int64_t default_step_cap(const RoadNetwork& net, int64_t cap) {
  return cap > 0 ? cap : std::max<int64_t>(64, 4LL * net.size());
}

}  // namespace

MarkovModel markov_fit(const std::vector<Trajectory>& trajectories, const RoadNetwork& net) {
  const int32_t n = net.size();
  MarkovModel m;
  m.probs.resize(n);
  m.dwell_minutes.assign(n, 0.0);

  std::vector<std::vector<int64_t>> counts(n);
  for (int32_t r = 0; r < n; ++r) counts[r].assign(net.reachable_successors(r).size(), 0);
  std::vector<double> dwell_sum(n, 0.0);
  std::vector<int64_t> dwell_cnt(n, 0);

  for (const Trajectory& t : trajectories) {
    for (size_t i = 1; i < t.points.size(); ++i) {
      const int32_t r = t.points[i - 1].segment;
      const int32_t nxt = t.points[i].segment;
      const auto& succ = net.reachable_successors(r);
      const auto it = std::lower_bound(succ.begin(), succ.end(), nxt);
      if (it != succ.end() && *it == nxt) counts[r][it - succ.begin()] += 1;
      dwell_sum[r] += (t.points[i].time_s - t.points[i - 1].time_s) / 60.0;
      dwell_cnt[r] += 1;
    }
  }

  double global_sum = 0.0;
  int64_t global_cnt = 0;
  for (int32_t r = 0; r < n; ++r) {
    global_sum += dwell_sum[r];
    global_cnt += dwell_cnt[r];
  }
  const double global_mean = global_cnt > 0 ? global_sum / global_cnt : 1.0;

  for (int32_t r = 0; r < n; ++r) {
    const size_t c = counts[r].size();
    m.probs[r].resize(c);
    int64_t total = 0;
    for (int64_t x : counts[r]) total += x;
    for (size_t i = 0; i < c; ++i)
      m.probs[r][i] = static_cast<double>(counts[r][i] + 1) / static_cast<double>(total + c);
    m.dwell_minutes[r] = dwell_cnt[r] > 0 ? dwell_sum[r] / dwell_cnt[r] : global_mean;
  }
  return m;
}

Policy markov_policy(const MarkovModel& model, const RoadNetwork& net) {
  return [&model, &net](std::span<const TrajPoint> prefix, int32_t) {
    const int32_t r = prefix.back().segment;
    PolicyStep step;
    step.candidates = net.reachable_successors(r);
    step.log_p.reserve(step.candidates.size());
    for (double p : model.probs[r]) step.log_p.push_back(std::log(p));
    step.dt_minutes.assign(step.candidates.size(), model.dwell_minutes[r]);
    return step;
  };
}

Trajectory markov_generate(const MarkovModel& model, const RoadNetwork& net,
                           const GenRequest& request, int64_t step_cap) {
  const int64_t cap = default_step_cap(net, step_cap);
  Trajectory out;
  out.points = {{request.r_org, request.t_org_s}};
  int32_t cur = request.r_org;
  for (int64_t step = 0; cur != request.r_dest; ++step) {
    if (step >= cap)
      throw Error(ErrorKind::generation, "markov rollout exceeded its step cap of " +
                                             std::to_string(cap));
    const auto& succ = net.reachable_successors(cur);
    if (succ.empty())
      throw Error(ErrorKind::generation,
                  "markov rollout reached dead end at segment " + std::to_string(cur));
    size_t best = 0;
    for (size_t i = 1; i < succ.size(); ++i)
      if (model.probs[cur][i] > model.probs[cur][best]) best = i;
    const double t_next = out.points.back().time_s + model.dwell_minutes[cur] * 60.0;
    cur = succ[best];
    out.points.push_back({cur, t_next});
  }
  return out;
}

Trajectory markov_search_generate(const MarkovModel& model, const RoadNetwork& net,
                                  const GenRequest& request, const SearchLimits& limits,
                                  SearchStats* stats) {
  return generate_trajectory(markov_policy(model, net), net, request, limits, stats);
}

Trajectory dijkstra_generate(const RoadNetwork& net, const GenRequest& request,
                             double speed_kmh) {
  // Path cost = sum of entered segment lengths, expressed through the
  // search engine by setting log_p = -length_km.
  Policy length_policy = [&net, speed_kmh](std::span<const TrajPoint> prefix, int32_t) {
    const int32_t r = prefix.back().segment;
    PolicyStep step;
    step.candidates = net.reachable_successors(r);
    for (int32_t c : step.candidates) {
      const double len_km = net.segment(c).length_m / 1000.0;
      step.log_p.push_back(-len_km);
      step.dt_minutes.push_back(len_km / speed_kmh * 60.0);
    }
    return step;
  };
  return generate_trajectory(length_policy, net, request);
}

Trajectory random_walk_generate(const RoadNetwork& net, const GenRequest& request, Rng& rng,
                                int64_t step_cap, double speed_kmh) {
  const int64_t cap = default_step_cap(net, step_cap);
  Trajectory out;
  out.points = {{request.r_org, request.t_org_s}};
  int32_t cur = request.r_org;
  for (int64_t step = 0; cur != request.r_dest && step < cap; ++step) {
    const auto& succ = net.reachable_successors(cur);
    if (succ.empty()) break;
    cur = succ[rng.next_below(succ.size())];
    const double dt_min = net.segment(cur).length_m / 1000.0 / speed_kmh * 60.0;
    out.points.push_back({cur, out.points.back().time_s + dt_min * 60.0});
  }
  return out;
}

}  // namespace navgen
