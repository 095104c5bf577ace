#pragma once

#include <cstdint>

#include "navgen/roadnet.hpp"

// Synthetic grid city: junctions on a rows x cols lattice, every
// inter-junction block realized as two directed segments.

namespace navgen {

struct GridSpec {
  int rows = 8;  // junction rows
  int cols = 8;  // junction columns
  double spacing_m = 500.0;
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  // Every k-th grid line carries the faster road type 1 ("avenue");
  // <= 0 disables and makes every segment type 0.
  int avenue_every = 4;
};

// Deterministic construction. Intersections exist for every ordered pair
// of segments meeting at a junction; the exact reverse twin is present
// but not reachable (no U-turns). Angles come from the generated
// geometry.
RoadNetwork grid_network(const GridSpec& spec);

}  // namespace navgen
