#include "voyagecast/geometry.hpp"

#include <algorithm>

#include "voyagecast/error.hpp"

namespace voyagecast {

Polygon::Polygon(std::vector<GeoPoint> ring) : ring_(std::move(ring)) {
  if (ring_.size() >= 2 && ring_.front().lon == ring_.back().lon &&
      ring_.front().lat == ring_.back().lat) {
    ring_.pop_back();
  }
  std::vector<GeoPoint> distinct;
  for (const auto& p : ring_) {
    const bool seen = std::any_of(distinct.begin(), distinct.end(), [&](const GeoPoint& q) {
      return q.lon == p.lon && q.lat == p.lat;
    });
    if (!seen) distinct.push_back(p);
  }
  if (distinct.size() < 3) {
    throw ValidationError("degenerate polygon: " + std::to_string(distinct.size()) +
                          " distinct vertices, need at least 3");
  }
  bounds_ = {ring_[0].lon, ring_[0].lat, ring_[0].lon, ring_[0].lat};
  for (const auto& p : ring_) {
    bounds_.min_lon = std::min(bounds_.min_lon, p.lon);
    bounds_.max_lon = std::max(bounds_.max_lon, p.lon);
    bounds_.min_lat = std::min(bounds_.min_lat, p.lat);
    bounds_.max_lat = std::max(bounds_.max_lat, p.lat);
  }
}

bool point_in_region(double lat, double lon, const Polygon& polygon) {
  const auto& ring = polygon.ring();
  if (ring.size() < 3) throw ValidationError("degenerate polygon: fewer than 3 vertices");
  if (!polygon.bounds().contains(lat, lon)) return false;

  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];

    // On-edge check: collinear and within the segment's box.
    const double cross = (b.lon - a.lon) * (lat - a.lat) - (b.lat - a.lat) * (lon - a.lon);
    if (cross == 0.0 && lon >= std::min(a.lon, b.lon) && lon <= std::max(a.lon, b.lon) &&
        lat >= std::min(a.lat, b.lat) && lat <= std::max(a.lat, b.lat)) {
      return true;
    }

    if ((a.lat > lat) != (b.lat > lat)) {
      const double x_cross = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
      if (lon < x_cross) inside = !inside;
    }
  }
  return inside;
}

Polygon rectangle(double min_lon, double min_lat, double max_lon, double max_lat) {
  return Polygon({{min_lon, min_lat}, {max_lon, min_lat}, {max_lon, max_lat}, {min_lon, max_lat}});
}

}  // namespace voyagecast
