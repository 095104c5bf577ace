#pragma once

#include <cstdint>
#include <vector>

namespace navgen {

struct TrajPoint {
  int32_t segment = 0;
  double time_s = 0.0;  // unix seconds
};

struct Trajectory {
  int64_t id = 0;
  std::vector<TrajPoint> points;

  bool empty() const { return points.empty(); }
  size_t size() const { return points.size(); }
};

}  // namespace navgen
