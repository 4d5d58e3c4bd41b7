#pragma once

#include <vector>

namespace voyagecast {

/// Planar position: x = longitude, y = latitude, both in degrees.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
};

struct BoundingBox {
  double min_lon, min_lat, max_lon, max_lat;
  bool contains(double lat, double lon) const {
    return lon >= min_lon && lon <= max_lon && lat >= min_lat && lat <= max_lat;
  }
};

/// Simple closed ring. A repeated closing vertex is accepted and dropped.
class Polygon {
 public:
  Polygon() = default;
  /// Throws ValidationError when fewer than 3 distinct vertices remain.
  explicit Polygon(std::vector<GeoPoint> ring);

  const std::vector<GeoPoint>& ring() const { return ring_; }
  const BoundingBox& bounds() const { return bounds_; }

 private:
  std::vector<GeoPoint> ring_;
  BoundingBox bounds_{0, 0, 0, 0};
};

/// Even-odd ray crossing test; points on an edge or vertex count as inside.
bool point_in_region(double lat, double lon, const Polygon& polygon);

Polygon rectangle(double min_lon, double min_lat, double max_lon, double max_lat);

}  // namespace voyagecast
