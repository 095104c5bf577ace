#include "navgen/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "navgen/geo.hpp"

namespace navgen {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error("line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
  }
}

long parse_long(const std::string& s, int line_no, const char* what) {
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error("line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
  }
}

}  // namespace

RoadNetwork RoadNetwork::from_parts(std::vector<RoadSegment> segments,
                                    std::vector<Intersection> intersections) {
  RoadNetwork net;
  const int32_t n = static_cast<int32_t>(segments.size());
  if (n == 0) throw data_error("network has no segments");

  net.segments_.resize(n);
  std::vector<bool> seen(n, false);
  for (const RoadSegment& s : segments) {
    if (s.id < 0 || s.id >= n)
      throw data_error("segment ids must be dense 0.." + std::to_string(n - 1) + "; got " +
                       std::to_string(s.id));
    if (seen[s.id]) throw data_error("duplicate segment id " + std::to_string(s.id));
    if (!(s.length_m > 0.0))
      throw data_error("segment " + std::to_string(s.id) + ": length must be > 0");
    if (s.lat < -90.0 || s.lat > 90.0)
      throw data_error("segment " + std::to_string(s.id) + ": latitude out of range");
    if (s.lon < -180.0 || s.lon > 180.0)
      throw data_error("segment " + std::to_string(s.id) + ": longitude out of range");
    seen[s.id] = true;
    net.segments_[s.id] = s;
  }

  for (const Intersection& e : intersections) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
      throw data_error("intersection (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                       ") references unknown segment");
    if (e.angle < 0.0 || e.angle > geo::kPi + 1e-12)
      throw data_error("intersection (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                       "): angle outside [0, pi]");
  }
  std::sort(intersections.begin(), intersections.end(),
            [](const Intersection& a, const Intersection& b) {
              return a.from != b.from ? a.from < b.from : a.to < b.to;
            });
  for (size_t i = 1; i < intersections.size(); ++i) {
    if (intersections[i].from == intersections[i - 1].from &&
        intersections[i].to == intersections[i - 1].to)
      throw data_error("duplicate intersection (" + std::to_string(intersections[i].from) + "," +
                       std::to_string(intersections[i].to) + ")");
  }
  net.records_ = std::move(intersections);

  net.build_indexes();
  net.derive_bearings();
  return net;
}

void RoadNetwork::build_indexes() {
  const int32_t n = size();
  out_idx_.assign(n, {});
  in_idx_.assign(n, {});
  reach_succ_.assign(n, {});
  for (size_t k = 0; k < records_.size(); ++k) {
    const Intersection& e = records_[k];
    out_idx_[e.from].push_back(static_cast<int32_t>(k));
    in_idx_[e.to].push_back(static_cast<int32_t>(k));
    if (e.reachable) reach_succ_[e.from].push_back(e.to);
  }
  // records_ is sorted by (from, to), so out lists are already ascending
  // by target and reach_succ_ ascending by id; in lists need sorting.
  for (auto& v : in_idx_)
    std::sort(v.begin(), v.end(),
              [this](int32_t a, int32_t b) { return records_[a].from < records_[b].from; });

  bbox_.min_lon = std::numeric_limits<double>::infinity();
  bbox_.min_lat = std::numeric_limits<double>::infinity();
  bbox_.max_lon = -std::numeric_limits<double>::infinity();
  bbox_.max_lat = -std::numeric_limits<double>::infinity();
  for (const RoadSegment& s : segments_) {
    bbox_.min_lon = std::min(bbox_.min_lon, s.lon);
    bbox_.max_lon = std::max(bbox_.max_lon, s.lon);
    bbox_.min_lat = std::min(bbox_.min_lat, s.lat);
    bbox_.max_lat = std::max(bbox_.max_lat, s.lat);
  }
}

void RoadNetwork::derive_bearings() {
  const int32_t n = size();
  bearing_.assign(n, 0.0);
  for (int32_t r = 0; r < n; ++r) {
    const RoadSegment& s = segments_[r];
    // Straightest reachable continuation first.
    const Intersection* best = nullptr;
    for (int32_t k : out_idx_[r]) {
      const Intersection& e = records_[k];
      if (!e.reachable) continue;
      const RoadSegment& t = segments_[e.to];
      if (geo::nearly_same_point(s.lon, s.lat, t.lon, t.lat)) continue;
      if (best == nullptr || e.angle < best->angle) best = &e;
    }
    if (best != nullptr) {
      const RoadSegment& t = segments_[best->to];
      bearing_[r] = geo::initial_bearing(s.lon, s.lat, t.lon, t.lat);
      continue;
    }
    // Dead end: straightest reachable predecessor.
    for (int32_t k : in_idx_[r]) {
      const Intersection& e = records_[k];
      if (!e.reachable) continue;
      const RoadSegment& p = segments_[e.from];
      if (geo::nearly_same_point(s.lon, s.lat, p.lon, p.lat)) continue;
      if (best == nullptr || e.angle < best->angle) best = &e;
    }
    if (best != nullptr) {
      const RoadSegment& p = segments_[best->from];
      bearing_[r] = geo::initial_bearing(p.lon, p.lat, s.lon, s.lat);
    }
    // Isolated segment keeps bearing 0.
  }
}

std::vector<const Intersection*> RoadNetwork::outgoing(int32_t r) const {
  check_id(r);
  std::vector<const Intersection*> out;
  out.reserve(out_idx_[r].size());
  for (int32_t k : out_idx_[r]) out.push_back(&records_[k]);
  return out;
}

std::vector<const Intersection*> RoadNetwork::incoming(int32_t r) const {
  check_id(r);
  std::vector<const Intersection*> out;
  out.reserve(in_idx_[r].size());
  for (int32_t k : in_idx_[r]) out.push_back(&records_[k]);
  return out;
}

const Intersection* RoadNetwork::find_record(int32_t from, int32_t to) const {
  check_id(from);
  check_id(to);
  for (int32_t k : out_idx_[from])
    if (records_[k].to == to) return &records_[k];
  return nullptr;
}

double RoadNetwork::distance_km(int32_t a, int32_t b) const {
  const RoadSegment& sa = segment(a);
  const RoadSegment& sb = segment(b);
  return geo::haversine_km(sa.lon, sa.lat, sb.lon, sb.lat);
}

double RoadNetwork::steering_angle(int32_t r_i, int32_t r_j) const {
  const RoadSegment& a = segment(r_i);
  const RoadSegment& b = segment(r_j);
  if (geo::nearly_same_point(a.lon, a.lat, b.lon, b.lat)) return 0.0;
  const double head = bearing_[r_i];
  double end_lon = 0.0, end_lat = 0.0;
  geo::project_point(a.lon, a.lat, head, a.length_m / 2000.0, &end_lon, &end_lat);
  if (geo::nearly_same_point(end_lon, end_lat, b.lon, b.lat)) return 0.0;
  const double toward = geo::initial_bearing(end_lon, end_lat, b.lon, b.lat);
  return geo::fold_angle(head, toward);
}

RoadNetwork RoadNetwork::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open network file: " + path);

  enum class Section { none, segments, intersections };
  Section section = Section::none;
  bool expect_header = false;
  std::vector<RoadSegment> segments;
  std::vector<Intersection> intersections;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "[segments]") {
      section = Section::segments;
      expect_header = true;
      continue;
    }
    if (line == "[intersections]") {
      section = Section::intersections;
      expect_header = true;
      continue;
    }
    if (section == Section::none)
      throw data_error("line " + std::to_string(line_no) + ": content before section tag");
    if (expect_header) {
      expect_header = false;  // column names are fixed; header row is skipped
      continue;
    }
    const auto f = split_csv(line);
    if (section == Section::segments) {
      if (f.size() != 5)
        throw data_error("line " + std::to_string(line_no) + ": expected 5 segment fields");
      RoadSegment s;
      s.id = static_cast<int32_t>(parse_long(f[0], line_no, "id"));
      s.length_m = parse_double(f[1], line_no, "length_m");
      s.road_type = static_cast<int32_t>(parse_long(f[2], line_no, "type"));
      s.lon = parse_double(f[3], line_no, "lon");
      s.lat = parse_double(f[4], line_no, "lat");
      segments.push_back(s);
    } else {
      if (f.size() != 4)
        throw data_error("line " + std::to_string(line_no) + ": expected 4 intersection fields");
      Intersection e;
      e.from = static_cast<int32_t>(parse_long(f[0], line_no, "from"));
      e.to = static_cast<int32_t>(parse_long(f[1], line_no, "to"));
      const long reach = parse_long(f[2], line_no, "reachable");
      if (reach != 0 && reach != 1)
        throw data_error("line " + std::to_string(line_no) + ": reachable must be 0 or 1");
      e.reachable = reach == 1;
      e.angle = parse_double(f[3], line_no, "angle_rad");
      intersections.push_back(e);
    }
  }
  if (segments.empty()) throw data_error("network file has no [segments] rows: " + path);
  return from_parts(std::move(segments), std::move(intersections));
}

void RoadNetwork::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings
  if (!out) throw config_error("cannot write network file: " + path);
  out.precision(17);
  out << "[segments]\n";
  out << "id,length_m,type,lon,lat\n";
  for (const RoadSegment& s : segments_)
    out << s.id << ',' << s.length_m << ',' << s.road_type << ',' << s.lon << ',' << s.lat << '\n';
  out << "[intersections]\n";
  out << "from,to,reachable,angle_rad\n";
  for (const Intersection& e : records_)
    out << e.from << ',' << e.to << ',' << (e.reachable ? 1 : 0) << ',' << e.angle << '\n';
  if (!out) throw config_error("write failed: " + path);
}

}  // namespace navgen
