#include "navgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "navgen/geo.hpp"

namespace navgen {

Histogram Histogram::build(const std::vector<double>& values, double upper, int bins) {
  Histogram h;
  h.bins = bins;
  h.upper = upper;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int b = 0;
    if (upper > 0.0) b = static_cast<int>(std::floor(v / upper * bins));
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    h.counts[b] += 1;
    h.total += 1;
  }
  return h;
}

double jsd(const Histogram& p, const Histogram& q) {
  if (p.bins != q.bins || p.upper != q.upper)
    throw data_error("jsd: histogram binning mismatch");
  double acc = 0.0;
  for (int i = 0; i < p.bins; ++i) {
    const double pi = p.mass(i);
    const double qi = q.mass(i);
    if (pi == 0.0 && qi == 0.0) continue;
    const double m = pi + qi;
    if (pi > 0.0) acc += 0.5 * pi * std::log(2.0 * pi / m);
    if (qi > 0.0) acc += 0.5 * qi * std::log(2.0 * qi / m);
  }
  return acc;
}

double travel_distance_km(const Trajectory& traj, const RoadNetwork& net) {
  if (traj.empty()) throw data_error("travel_distance: empty trajectory");
  double total_m = 0.0;
  for (const TrajPoint& p : traj.points) total_m += net.segment(p.segment).length_m;
  return total_m / 1000.0;
}

double gyration_radius_km(const Trajectory& traj, const RoadNetwork& net) {
  if (traj.empty()) throw data_error("gyration_radius: empty trajectory");
  double lon = 0.0, lat = 0.0;
  for (const TrajPoint& p : traj.points) {
    lon += net.segment(p.segment).lon;
    lat += net.segment(p.segment).lat;
  }
  lon /= traj.size();
  lat /= traj.size();
  double sq = 0.0;
  for (const TrajPoint& p : traj.points) {
    const RoadSegment& s = net.segment(p.segment);
    const double d = geo::haversine_km(s.lon, s.lat, lon, lat);
    sq += d * d;
  }
  return std::sqrt(sq / traj.size());
}

std::vector<double> dwell_durations_min(const Trajectory& traj) {
  std::vector<double> out;
  for (size_t i = 1; i < traj.points.size(); ++i) {
    const double dt = (traj.points[i].time_s - traj.points[i - 1].time_s) / 60.0;
    if (dt < 0.0)
      throw data_error("trajectory " + std::to_string(traj.id) + ": timestamps decrease");
    out.push_back(dt);
  }
  return out;
}

namespace {

double point_dist_km(const RoadNetwork& net, int32_t a, int32_t b) {
  return net.distance_km(a, b);
}

}  // namespace

double hausdorff_km(const Trajectory& a, const Trajectory& b, const RoadNetwork& net) {
  if (a.empty() || b.empty()) throw data_error("hausdorff: empty trajectory");
  double worst = 0.0;
  for (const TrajPoint& pa : a.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const TrajPoint& pb : b.points)
      best = std::min(best, point_dist_km(net, pa.segment, pb.segment));
    worst = std::max(worst, best);
  }
  for (const TrajPoint& pb : b.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const TrajPoint& pa : a.points)
      best = std::min(best, point_dist_km(net, pa.segment, pb.segment));
    worst = std::max(worst, best);
  }
  return worst;
}

double dtw_km(const Trajectory& a, const Trajectory& b, const RoadNetwork& net) {
  if (a.empty() || b.empty()) throw data_error("dtw: empty trajectory");
  const size_t n = a.size(), m = b.size();
  std::vector<double> prev(m), cur(m);
  for (size_t j = 0; j < m; ++j) {
    const double d = point_dist_km(net, a.points[0].segment, b.points[j].segment);
    prev[j] = d + (j > 0 ? prev[j - 1] : 0.0);
  }
  for (size_t i = 1; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      const double d = point_dist_km(net, a.points[i].segment, b.points[j].segment);
      double best = prev[j];                             // repeat b_j
      if (j > 0) best = std::min(best, cur[j - 1]);      // repeat a_i
      if (j > 0) best = std::min(best, prev[j - 1]);     // advance both
      cur[j] = d + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

double edr(const Trajectory& a, const Trajectory& b, const RoadNetwork& net, double threshold_m) {
  if (a.empty() || b.empty()) throw data_error("edr: empty trajectory");
  if (threshold_m <= 0.0) throw config_error("edr: threshold must be positive");
  const size_t n = a.size(), m = b.size();
  const double thr_km = threshold_m / 1000.0;
  std::vector<double> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<double>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<double>(i);
    for (size_t j = 1; j <= m; ++j) {
      const bool match =
          point_dist_km(net, a.points[i - 1].segment, b.points[j - 1].segment) <= thr_km;
      cur[j] = std::min({prev[j - 1] + (match ? 0.0 : 1.0), prev[j] + 1.0, cur[j - 1] + 1.0});
    }
    std::swap(prev, cur);
  }
  return prev[m] / static_cast<double>(std::max(n, m));
}

GridIndex::GridIndex(const RoadNetwork& net, double cell)
    : cell_m(cell), origin_lon(net.bbox().min_lon), origin_lat(net.bbox().min_lat) {}

std::pair<int32_t, int32_t> GridIndex::cell(double lon, double lat) const {
  const double r_m = geo::kEarthRadiusKm * 1000.0;
  const double east_m =
      geo::deg2rad(lon - origin_lon) * r_m * std::cos(geo::deg2rad(origin_lat));
  const double north_m = geo::deg2rad(lat - origin_lat) * r_m;
  return {static_cast<int32_t>(std::floor(north_m / cell_m)),
          static_cast<int32_t>(std::floor(east_m / cell_m))};
}

namespace {

using OdKey = std::pair<std::pair<int32_t, int32_t>, std::pair<int32_t, int32_t>>;

OdKey od_key(const Trajectory& t, const RoadNetwork& net, const GridIndex& grid) {
  const RoadSegment& o = net.segment(t.points.front().segment);
  const RoadSegment& d = net.segment(t.points.back().segment);
  return {grid.cell(o.lon, o.lat), grid.cell(d.lon, d.lat)};
}

void collect_globals(const std::vector<Trajectory>& set, const RoadNetwork& net,
                     std::vector<double>* dist, std::vector<double>* rad,
                     std::vector<double>* dur) {
  for (const Trajectory& t : set) {
    dist->push_back(travel_distance_km(t, net));
    rad->push_back(gyration_radius_km(t, net));
    // Whole-trip duration; one value per trajectory like the other two.
    dur->push_back((t.points.back().time_s - t.points.front().time_s) / 60.0);
  }
}

}  // namespace

MetricsReport evaluate(const std::vector<Trajectory>& real, const std::vector<Trajectory>& gen,
                       const RoadNetwork& net, const EvalOptions& opt) {
  if (real.empty() || gen.empty()) throw data_error("evaluate: both sets must be nonempty");

  MetricsReport rep;
  rep.real_count = static_cast<int64_t>(real.size());
  rep.gen_count = static_cast<int64_t>(gen.size());

  std::vector<double> rd, rr, ru, gd, gr, gu;
  collect_globals(real, net, &rd, &rr, &ru);
  collect_globals(gen, net, &gd, &gr, &gu);
  const double up_d = rd.empty() ? 0.0 : *std::max_element(rd.begin(), rd.end());
  const double up_r = rr.empty() ? 0.0 : *std::max_element(rr.begin(), rr.end());
  const double up_u = ru.empty() ? 0.0 : *std::max_element(ru.begin(), ru.end());

  rep.real_distance = Histogram::build(rd, up_d, opt.bins);
  rep.gen_distance = Histogram::build(gd, up_d, opt.bins);
  rep.real_radius = Histogram::build(rr, up_r, opt.bins);
  rep.gen_radius = Histogram::build(gr, up_r, opt.bins);
  rep.real_duration = Histogram::build(ru, up_u, opt.bins);
  rep.gen_duration = Histogram::build(gu, up_u, opt.bins);
  rep.jsd_distance = jsd(rep.real_distance, rep.gen_distance);
  rep.jsd_radius = jsd(rep.real_radius, rep.gen_radius);
  rep.jsd_duration = jsd(rep.real_duration, rep.gen_duration);

  GridIndex grid(net, opt.grid_m);
  std::map<OdKey, std::vector<size_t>> real_by_key, gen_by_key;
  for (size_t i = 0; i < real.size(); ++i) real_by_key[od_key(real[i], net, grid)].push_back(i);
  for (size_t i = 0; i < gen.size(); ++i) gen_by_key[od_key(gen[i], net, grid)].push_back(i);
  rep.real_od_keys = static_cast<int64_t>(real_by_key.size());
  rep.gen_od_keys = static_cast<int64_t>(gen_by_key.size());

  int64_t matched_gen_trajs = 0;
  for (const auto& [key, idxs] : gen_by_key)
    if (real_by_key.count(key)) matched_gen_trajs += static_cast<int64_t>(idxs.size());
  rep.od_match_rate = static_cast<double>(matched_gen_trajs) / static_cast<double>(gen.size());

  LocalMetrics local;
  double sum_h = 0.0, sum_dtw = 0.0, sum_edr = 0.0;
  for (const auto& [key, gidx] : gen_by_key) {
    auto rit = real_by_key.find(key);
    if (rit == real_by_key.end()) continue;
    double kh = 0.0, kd = 0.0, ke = 0.0;
    int64_t pairs = 0;
    for (size_t ri : rit->second) {
      for (size_t gi : gidx) {
        if (pairs >= opt.max_pairs_per_key) break;
        kh += hausdorff_km(real[ri], gen[gi], net);
        kd += dtw_km(real[ri], gen[gi], net);
        ke += edr(real[ri], gen[gi], net, opt.edr_threshold_m);
        ++pairs;
      }
      if (pairs >= opt.max_pairs_per_key) break;
    }
    if (pairs == 0) continue;
    sum_h += kh / pairs;
    sum_dtw += kd / pairs;
    sum_edr += ke / pairs;
    local.matched_keys += 1;
    local.pairs_evaluated += pairs;
  }
  if (local.matched_keys > 0) {
    local.mean_hausdorff_km = sum_h / local.matched_keys;
    local.mean_dtw_km = sum_dtw / local.matched_keys;
    local.mean_edr = sum_edr / local.matched_keys;
    rep.local = local;
  }
  return rep;
}

std::string MetricsReport::summary() const {
  std::ostringstream out;
  out.precision(6);
  out << "trajectories: real=" << real_count << " generated=" << gen_count << "\n";
  out << "global JSD (nats, 100-bin histograms bounded by the real maxima)\n";
  out << "  distance_jsd," << jsd_distance << "\n";
  out << "  radius_jsd," << jsd_radius << "\n";
  out << "  duration_jsd," << jsd_duration << "\n";
  out << "od grid keys: real=" << real_od_keys << " generated=" << gen_od_keys
      << " match_rate=" << od_match_rate << "\n";
  if (local.has_value()) {
    out << "local metrics over OD-matched pairs (" << local->matched_keys << " keys, "
        << local->pairs_evaluated << " pairs)\n";
    out << "  mean_hausdorff_km," << local->mean_hausdorff_km << "\n";
    out << "  mean_dtw_km," << local->mean_dtw_km << "\n";
    out << "  mean_edr," << local->mean_edr << "\n";
  } else {
    out << "local metrics: absent (no OD key shared between the two sets)\n";
  }
  return out.str();
}

void MetricsReport::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/summary.txt", std::ios::binary);
    if (!out) throw config_error("cannot write metrics summary under " + dir);
    out << summary();
  }
  auto dump = [&](const char* name, const Histogram& r, const Histogram& g) {
    std::ofstream out(dir + "/hist_" + name + ".csv", std::ios::binary);
    out << "bin_lo,bin_hi,real_mass,generated_mass\n";
    out.precision(12);
    for (int i = 0; i < r.bins; ++i) {
      const double lo = r.upper * i / r.bins;
      const double hi = r.upper * (i + 1) / r.bins;
      out << lo << ',' << hi << ',' << r.mass(i) << ',' << g.mass(i) << '\n';
    }
  };
  dump("distance_km", real_distance, gen_distance);
  dump("radius_km", real_radius, gen_radius);
  dump("duration_min", real_duration, gen_duration);
}

}  // namespace navgen
