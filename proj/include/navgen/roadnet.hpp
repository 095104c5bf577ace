#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navgen/error.hpp"

// Road-network graph model. Road segments are the nodes of a directed
// graph; intersections are the edges between adjacent segments and carry
// a reachability flag plus the steering angle between the two segments.

namespace navgen {

struct RoadSegment {
  int32_t id = 0;
  double length_m = 0.0;
  int32_t road_type = 0;
  double lon = 0.0;  // representative midpoint, degrees
  double lat = 0.0;
};

struct Intersection {
  int32_t from = 0;
  int32_t to = 0;
  bool reachable = false;
  double angle = 0.0;  // radians in [0, pi]
};

struct BoundingBox {
  double min_lon = 0.0, max_lon = 0.0, min_lat = 0.0, max_lat = 0.0;
};

class RoadNetwork {
 public:
  // Validates all structural invariants (dense ids, positive lengths,
  // coordinate ranges, no dangling intersection endpoints, angle range,
  // unique (from,to) pairs) and derives per-segment bearings.
  static RoadNetwork from_parts(std::vector<RoadSegment> segments,
                                std::vector<Intersection> intersections);

  // Sectioned CSV format; see docs in trajfile.hpp for the exact layout.
  static RoadNetwork load(const std::string& path);
  void save(const std::string& path) const;

  int32_t size() const { return static_cast<int32_t>(segments_.size()); }
  const RoadSegment& segment(int32_t id) const {
    check_id(id);
    return segments_[id];
  }
  const std::vector<RoadSegment>& segments() const { return segments_; }
  const std::vector<Intersection>& intersections() const { return records_; }
  const BoundingBox& bbox() const { return bbox_; }

  // Intersection records leaving `r`, sorted by target id.
  std::vector<const Intersection*> outgoing(int32_t r) const;
  // Intersection records entering `r`, sorted by source id.
  std::vector<const Intersection*> incoming(int32_t r) const;
  // The record (from,to) if present, else nullptr.
  const Intersection* find_record(int32_t from, int32_t to) const;

  // Ids reachable from `r` in one step, ascending.
  const std::vector<int32_t>& reachable_successors(int32_t r) const {
    check_id(r);
    return reach_succ_[r];
  }

  // Great-circle distance between segment midpoints, km.
  double distance_km(int32_t a, int32_t b) const;

  // Derived travel bearing of a segment (radians, clockwise from north).
  // Computed from the straightest reachable continuation; falls back to
  // the straightest reachable predecessor, then to 0 for isolated
  // segments.
  double bearing(int32_t r) const {
    check_id(r);
    return bearing_[r];
  }

  // Angle between the travel bearing of r_i and the bearing from r_i's
  // forward endpoint toward r_j's midpoint, folded into [0, pi].
  // Coincident geometry points yield 0 by convention.
  double steering_angle(int32_t r_i, int32_t r_j) const;

 private:
  void check_id(int32_t id) const {
    if (id < 0 || id >= size()) throw data_error("invalid segment id " + std::to_string(id));
  }
  void build_indexes();
  void derive_bearings();

  std::vector<RoadSegment> segments_;
  std::vector<Intersection> records_;          // sorted by (from, to)
  std::vector<std::vector<int32_t>> out_idx_;  // record indices per source
  std::vector<std::vector<int32_t>> in_idx_;   // record indices per target
  std::vector<std::vector<int32_t>> reach_succ_;
  std::vector<double> bearing_;
  BoundingBox bbox_;
};

}  // namespace navgen
