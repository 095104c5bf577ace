#include "navgen/search.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <queue>
#include <thread>

namespace navgen {

namespace {

bool lex_less(const std::vector<TrajPoint>& a, const std::vector<TrajPoint>& b) {
  const size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    if (a[i].segment != b[i].segment) return a[i].segment < b[i].segment;
  }
  return a.size() < b.size();
}

struct HeapEntry {
  double cost;
  int64_t counter;
  int32_t segment;
  bool operator>(const HeapEntry& o) const {
    if (cost != o.cost) return cost > o.cost;
    return counter > o.counter;
  }
};

}  // namespace

Trajectory generate_trajectory(const Policy& policy, const RoadNetwork& net,
                               const GenRequest& request, const SearchLimits& limits,
                               SearchStats* stats) {
  const int32_t n = net.size();
  if (request.r_org < 0 || request.r_org >= n || request.r_dest < 0 || request.r_dest >= n)
    throw data_error("generation request references unknown segments");
  const int64_t budget = limits.max_pops > 0 ? limits.max_pops : 50LL * n;

  std::vector<double> phi(n, std::numeric_limits<double>::infinity());
  std::vector<std::vector<TrajPoint>> best_path(n);
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>> heap;
  int64_t counter = 0;

  phi[request.r_org] = 0.0;
  best_path[request.r_org] = {{request.r_org, request.t_org_s}};
  heap.push({0.0, counter++, request.r_org});

  SearchStats local;
  SearchStats& st = stats ? *stats : local;
  st = SearchStats{};

  while (!heap.empty()) {
    if (st.pops >= budget) break;
    const HeapEntry top = heap.top();
    heap.pop();
    ++st.pops;
    if (top.cost > phi[top.segment]) {
      ++st.stale_skips;
      continue;
    }
    st.accepted_pop_costs.push_back(top.cost);
    if (top.segment == request.r_dest) {
      Trajectory out;
      out.points = best_path[top.segment];
      st.success = true;
      return out;
    }

    ++st.expansions;
    const std::vector<TrajPoint>& prefix = best_path[top.segment];
    PolicyStep step = policy(std::span<const TrajPoint>(prefix.data(), prefix.size()),
                             request.r_dest);
    for (size_t c = 0; c < step.candidates.size(); ++c) {
      const int32_t nxt = step.candidates[c];
      const double new_cost = phi[top.segment] - step.log_p[c];
      if (new_cost > phi[nxt]) continue;
      std::vector<TrajPoint> path = prefix;
      path.push_back({nxt, prefix.back().time_s + step.dt_minutes[c] * 60.0});
      if (new_cost == phi[nxt] && !lex_less(path, best_path[nxt])) continue;
      phi[nxt] = new_cost;
      best_path[nxt] = std::move(path);
      heap.push({new_cost, counter++, nxt});
    }
  }

  throw Error(ErrorKind::generation,
              "destination unreachable within budget (origin " + std::to_string(request.r_org) +
                  ", destination " + std::to_string(request.r_dest) + ", pops " +
                  std::to_string(st.pops) + ", expansions " + std::to_string(st.expansions) +
                  ", stale " + std::to_string(st.stale_skips) + ")");
}

BatchResult generate_batch(const Policy& policy, const RoadNetwork& net,
                           const std::vector<GenRequest>& requests, const SearchLimits& limits,
                           int threads) {
  BatchResult out;
  out.trajectories.resize(requests.size());
  out.errors.resize(requests.size());
  if (requests.empty()) return out;

  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        out.trajectories[i] = generate_trajectory(policy, net, requests[i], limits);
      } catch (const std::exception& e) {
        out.errors[i] = e.what();
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(requests.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& t : out.trajectories)
    if (t.has_value()) ++out.succeeded;
  return out;
}

Policy model_policy(const FrozenModel& frozen) {
  return [&frozen](std::span<const TrajPoint> prefix, int32_t r_dest) {
    FrozenModel::StepScores s = frozen.score_step(prefix, r_dest);
    return PolicyStep{std::move(s.candidates), std::move(s.log_p), std::move(s.dt_minutes)};
  };
}

}  // namespace navgen
