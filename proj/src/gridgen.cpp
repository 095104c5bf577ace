#include "navgen/gridgen.hpp"

#include <cmath>
#include <vector>

#include "navgen/geo.hpp"

namespace navgen {

RoadNetwork grid_network(const GridSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) throw config_error("grid needs rows >= 2 and cols >= 2");
  if (!(spec.spacing_m > 0.0)) throw config_error("grid spacing must be positive");

  const double r_m = geo::kEarthRadiusKm * 1000.0;
  const double deg_per_m_lat = 180.0 / (geo::kPi * r_m);
  const double deg_per_m_lon = deg_per_m_lat / std::cos(geo::deg2rad(spec.origin_lat));

  auto jlon = [&](int c) { return spec.origin_lon + c * spec.spacing_m * deg_per_m_lon; };
  auto jlat = [&](int r) { return spec.origin_lat + r * spec.spacing_m * deg_per_m_lat; };

  struct Seg {
    int jr0, jc0, jr1, jc1;  // start/end junctions
    int32_t twin;
    int32_t type;
  };
  std::vector<Seg> raw;
  auto is_avenue = [&](int line) {
    return spec.avenue_every > 0 && line % spec.avenue_every == 0;
  };

  // Horizontal blocks row-major (east then west), then vertical blocks
  // column-major (north then south).
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c + 1 < spec.cols; ++c) {
      const int32_t e = static_cast<int32_t>(raw.size());
      raw.push_back({r, c, r, c + 1, e + 1, is_avenue(r) ? 1 : 0});
      raw.push_back({r, c + 1, r, c, e, is_avenue(r) ? 1 : 0});
    }
  for (int c = 0; c < spec.cols; ++c)
    for (int r = 0; r + 1 < spec.rows; ++r) {
      const int32_t n = static_cast<int32_t>(raw.size());
      raw.push_back({r, c, r + 1, c, n + 1, is_avenue(c) ? 1 : 0});
      raw.push_back({r + 1, c, r, c, n, is_avenue(c) ? 1 : 0});
    }

  std::vector<RoadSegment> segments(raw.size());
  std::vector<double> heading(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const Seg& s = raw[i];
    const double lon0 = jlon(s.jc0), lat0 = jlat(s.jr0);
    const double lon1 = jlon(s.jc1), lat1 = jlat(s.jr1);
    RoadSegment& seg = segments[i];
    seg.id = static_cast<int32_t>(i);
    seg.length_m = geo::haversine_km(lon0, lat0, lon1, lat1) * 1000.0;
    seg.road_type = s.type;
    seg.lon = (lon0 + lon1) / 2.0;
    seg.lat = (lat0 + lat1) / 2.0;
    heading[i] = geo::initial_bearing(lon0, lat0, lon1, lat1);
  }

  // Segments grouped by start junction for the meeting test.
  std::vector<std::vector<int32_t>> starting(spec.rows * spec.cols);
  auto jid = [&](int r, int c) { return r * spec.cols + c; };
  for (size_t i = 0; i < raw.size(); ++i) starting[jid(raw[i].jr0, raw[i].jc0)].push_back(i);

  std::vector<Intersection> intersections;
  for (size_t i = 0; i < raw.size(); ++i) {
    for (int32_t j : starting[jid(raw[i].jr1, raw[i].jc1)]) {
      if (static_cast<size_t>(j) == i) continue;
      Intersection e;
      e.from = static_cast<int32_t>(i);
      e.to = j;
      e.reachable = j != raw[i].twin;
      e.angle = geo::fold_angle(heading[i], heading[j]);
      intersections.push_back(e);
    }
  }
  return RoadNetwork::from_parts(std::move(segments), std::move(intersections));
}

}  // namespace navgen
