#include "navgen/trajfile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "navgen/rng.hpp"

namespace navgen {

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open trajectory file: " + path);
  std::vector<Trajectory> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw data_error("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_array() || j.size() != 2 || !j[1].is_array())
      throw data_error("trajectory line " + std::to_string(line_no) +
                       ": expected [id, [[segment, time], ...]]");
    Trajectory t;
    t.id = j[0].get<int64_t>();
    for (const auto& pt : j[1]) {
      if (!pt.is_array() || pt.size() != 2)
        throw data_error("trajectory line " + std::to_string(line_no) + ": bad point");
      t.points.push_back({pt[0].get<int32_t>(), pt[1].get<double>()});
    }
    for (size_t i = 1; i < t.points.size(); ++i)
      if (t.points[i].time_s < t.points[i - 1].time_s)
        throw data_error("trajectory line " + std::to_string(line_no) +
                         ": timestamps decrease");
    out.push_back(std::move(t));
  }
  return out;
}

void save_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write trajectory file: " + path);
  for (const Trajectory& t : trajectories) {
    nlohmann::json pts = nlohmann::json::array();
    for (const TrajPoint& p : t.points) pts.push_back({p.segment, p.time_s});
    out << nlohmann::json::array({t.id, pts}).dump() << '\n';
  }
  if (!out) throw config_error("write failed: " + path);
}

RejectReason filter_reason(const Trajectory& traj, int min_points, double max_gap_min) {
  if (static_cast<int>(traj.points.size()) < min_points) return RejectReason::too_short;
  std::set<int32_t> seen;
  for (const TrajPoint& p : traj.points)
    if (!seen.insert(p.segment).second) return RejectReason::has_loop;
  for (size_t i = 1; i < traj.points.size(); ++i) {
    const double gap = (traj.points[i].time_s - traj.points[i - 1].time_s) / 60.0;
    if (gap > max_gap_min) return RejectReason::long_gap;
  }
  return RejectReason::kept;
}

void FilterReport::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write filter report: " + path);
  out << "reason,count\n";
  out << "kept," << kept << "\n";
  out << "too_short," << too_short << "\n";
  out << "has_loop," << has_loop << "\n";
  out << "long_gap," << long_gap << "\n";
}

SplitResult validate_and_split(const std::vector<Trajectory>& trajectories, double train_ratio,
                               double val_ratio, uint64_t seed, int min_points,
                               double max_gap_min) {
  if (train_ratio < 0.0 || val_ratio < 0.0 || train_ratio + val_ratio > 1.0)
    throw config_error("split ratios must be non-negative and sum to at most 1");

  SplitResult res;
  std::vector<const Trajectory*> kept;
  for (const Trajectory& t : trajectories) {
    switch (filter_reason(t, min_points, max_gap_min)) {
      case RejectReason::kept:
        kept.push_back(&t);
        res.report.kept += 1;
        break;
      case RejectReason::too_short:
        res.report.too_short += 1;
        break;
      case RejectReason::has_loop:
        res.report.has_loop += 1;
        break;
      case RejectReason::long_gap:
        res.report.long_gap += 1;
        break;
    }
  }

  std::vector<size_t> order(kept.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const size_t n = kept.size();
  const size_t n_train = static_cast<size_t>(std::llround(train_ratio * n));
  const size_t n_val =
      std::min(n - n_train, static_cast<size_t>(std::llround(val_ratio * n)));
  for (size_t i = 0; i < n; ++i) {
    const Trajectory& t = *kept[order[i]];
    if (i < n_train)
      res.train.push_back(t);
    else if (i < n_train + n_val)
      res.val.push_back(t);
    else
      res.test.push_back(t);
  }
  return res;
}

void validate_against_network(const Trajectory& traj, const RoadNetwork& net) {
  if (traj.points.empty()) throw data_error("trajectory " + std::to_string(traj.id) + " is empty");
  for (const TrajPoint& p : traj.points)
    if (p.segment < 0 || p.segment >= net.size())
      throw data_error("trajectory " + std::to_string(traj.id) + ": unknown segment " +
                       std::to_string(p.segment));
  for (size_t i = 1; i < traj.points.size(); ++i) {
    const auto& succ = net.reachable_successors(traj.points[i - 1].segment);
    if (!std::binary_search(succ.begin(), succ.end(), traj.points[i].segment))
      throw data_error("trajectory " + std::to_string(traj.id) + ": segment " +
                       std::to_string(traj.points[i].segment) + " not reachable from " +
                       std::to_string(traj.points[i - 1].segment));
    if (traj.points[i].time_s < traj.points[i - 1].time_s)
      throw data_error("trajectory " + std::to_string(traj.id) + ": timestamps decrease");
  }
}

std::vector<GenRequest> load_requests(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open request file: " + path);
  std::vector<GenRequest> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("r_org", 0) == 0) continue;
    GenRequest r;
    if (std::sscanf(line.c_str(), "%d,%lf,%d", &r.r_org, &r.t_org_s, &r.r_dest) != 3)
      throw data_error("request line " + std::to_string(line_no) + ": expected r_org,t_org,r_dest");
    out.push_back(r);
  }
  return out;
}

void save_requests(const std::vector<GenRequest>& requests, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write request file: " + path);
  out << "r_org,t_org,r_dest\n";
  out.precision(17);
  for (const GenRequest& r : requests)
    out << r.r_org << ',' << r.t_org_s << ',' << r.r_dest << '\n';
  if (!out) throw config_error("write failed: " + path);
}

}  // namespace navgen
