#pragma once

#include "ground/util.hpp"

namespace ground::geo {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(const LatLon& a, const LatLon& b) noexcept;

struct BoundingBox {
  double min_lat = 0.0;
  double max_lat = 0.0;
  double min_lon = 0.0;
  double max_lon = 0.0;

  bool valid() const noexcept { return min_lat < max_lat && min_lon < max_lon; }
  /// Boundaries are inclusive.
  bool contains(const LatLon& p) const noexcept {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Default deployment region (greater Doha).
inline constexpr BoundingBox kDohaBox{24.80, 25.50, 51.20, 51.70};

}  // namespace ground::geo
