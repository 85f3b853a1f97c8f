#pragma once

#include <cmath>

namespace mobsim {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const GeoPoint& o) const { return lat == o.lat && lon == o.lon; }
  bool operator!=(const GeoPoint& o) const { return !(*this == o); }
};

// Great-circle distance in meters (haversine, R = 6371 km).
inline double haversine_meters(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kEarthRadius = 6371000.0;
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  double lat1 = a.lat * kDegToRad;
  double lat2 = b.lat * kDegToRad;
  double dlat = (b.lat - a.lat) * kDegToRad;
  double dlon = (b.lon - a.lon) * kDegToRad;
  double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(h)));
}

// Linear interpolation between two points, f in [0, 1].
inline GeoPoint lerp(const GeoPoint& a, const GeoPoint& b, double f) {
  return {a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f};
}

}  // namespace mobsim
