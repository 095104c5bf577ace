#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navgen/roadnet.hpp"
#include "navgen/trajectory.hpp"

// Global distributional metrics (travel distance / gyration radius /
// trip duration, compared with Jensen-Shannon divergence over fixed
// histograms) and OD-matched local similarity metrics (Hausdorff, DTW,
// EDR) over segment midpoints.

namespace navgen {

struct Histogram {
  int bins = 100;
  double upper = 0.0;  // lower bound is 0
  std::vector<int64_t> counts;
  int64_t total = 0;

  static Histogram build(const std::vector<double>& values, double upper, int bins);
  double mass(int i) const { return total == 0 ? 0.0 : static_cast<double>(counts[i]) / total; }
};

// Natural-log JSD; bins where both masses vanish contribute zero.
// Throws on binning mismatch.
double jsd(const Histogram& p, const Histogram& q);

double travel_distance_km(const Trajectory& traj, const RoadNetwork& net);
double gyration_radius_km(const Trajectory& traj, const RoadNetwork& net);
// The n-1 consecutive intervals in minutes; timestamps must be non-decreasing.
std::vector<double> dwell_durations_min(const Trajectory& traj);

double hausdorff_km(const Trajectory& a, const Trajectory& b, const RoadNetwork& net);
double dtw_km(const Trajectory& a, const Trajectory& b, const RoadNetwork& net);
double edr(const Trajectory& a, const Trajectory& b, const RoadNetwork& net,
           double threshold_m = 200.0);

// Square grid anchored at the network bounding-box corner.
struct GridIndex {
  double cell_m = 200.0;
  double origin_lon = 0.0, origin_lat = 0.0;

  GridIndex(const RoadNetwork& net, double cell_m);
  std::pair<int32_t, int32_t> cell(double lon, double lat) const;
};

struct EvalOptions {
  int bins = 100;
  double grid_m = 200.0;
  double edr_threshold_m = 200.0;
  int max_pairs_per_key = 10;
};

struct LocalMetrics {
  double mean_hausdorff_km = 0.0;
  double mean_dtw_km = 0.0;
  double mean_edr = 0.0;
  int64_t matched_keys = 0;
  int64_t pairs_evaluated = 0;
};

struct MetricsReport {
  double jsd_distance = 0.0;
  double jsd_radius = 0.0;
  double jsd_duration = 0.0;
  Histogram real_distance, gen_distance;
  Histogram real_radius, gen_radius;
  Histogram real_duration, gen_duration;

  std::optional<LocalMetrics> local;  // absent when no OD key overlaps
  int64_t real_od_keys = 0;
  int64_t gen_od_keys = 0;
  double od_match_rate = 0.0;  // generated trajectories whose OD key occurs in the real set
  int64_t real_count = 0;
  int64_t gen_count = 0;

  // summary.txt plus histogram CSV dumps under `dir`.
  void save(const std::string& dir) const;
  std::string summary() const;
};

MetricsReport evaluate(const std::vector<Trajectory>& real, const std::vector<Trajectory>& gen,
                       const RoadNetwork& net, const EvalOptions& opt = {});

}  // namespace navgen
