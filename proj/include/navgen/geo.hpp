#pragma once

#include <cmath>

// Great-circle geometry on lon/lat degrees. All distances in kilometers,
// all angles in radians unless noted.

namespace navgen::geo {

inline constexpr double kEarthRadiusKm = 6371.0088;  // mean Earth radius
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Haversine distance between two lon/lat points, km.
inline double haversine_km(double lon1, double lat1, double lon2, double lat2) {
  const double p1 = deg2rad(lat1);
  const double p2 = deg2rad(lat2);
  const double dp = p2 - p1;
  const double dl = deg2rad(lon2 - lon1);
  const double s1 = std::sin(dp / 2.0);
  const double s2 = std::sin(dl / 2.0);
  const double a = s1 * s1 + std::cos(p1) * std::cos(p2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

// Initial great-circle bearing from point 1 toward point 2, radians in
// [0, 2pi), measured clockwise from north. Undefined for coincident
// points; callers must handle that case.
inline double initial_bearing(double lon1, double lat1, double lon2, double lat2) {
  const double p1 = deg2rad(lat1);
  const double p2 = deg2rad(lat2);
  const double dl = deg2rad(lon2 - lon1);
  const double y = std::sin(dl) * std::cos(p2);
  const double x = std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
  double b = std::atan2(y, x);
  if (b < 0.0) b += 2.0 * kPi;
  return b;
}

// Absolute angular difference between two bearings, folded into [0, pi].
inline double fold_angle(double b1, double b2) {
  double d = std::fabs(b1 - b2);
  d = std::fmod(d, 2.0 * kPi);
  if (d > kPi) d = 2.0 * kPi - d;
  return d;
}

// Destination point reached by travelling `dist_km` from (lon, lat) along
// an initial bearing (radians, clockwise from north).
inline void project_point(double lon, double lat, double bearing, double dist_km,
                          double* out_lon, double* out_lat) {
  const double ang = dist_km / kEarthRadiusKm;
  const double p1 = deg2rad(lat);
  const double l1 = deg2rad(lon);
  const double p2 =
      std::asin(std::sin(p1) * std::cos(ang) + std::cos(p1) * std::sin(ang) * std::cos(bearing));
  const double l2 = l1 + std::atan2(std::sin(bearing) * std::sin(ang) * std::cos(p1),
                                    std::cos(ang) - std::sin(p1) * std::sin(p2));
  *out_lat = rad2deg(p2);
  *out_lon = rad2deg(l2);
}

inline bool nearly_same_point(double lon1, double lat1, double lon2, double lat2) {
  return std::fabs(lon1 - lon2) < 1e-12 && std::fabs(lat1 - lat2) < 1e-12;
}

}  // namespace navgen::geo
