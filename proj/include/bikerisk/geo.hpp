#pragma once

#include <span>
#include <vector>

namespace bikerisk::geo {

inline constexpr double kEarthRadiusM = 6371008.8;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

using Polyline = std::vector<LatLon>;

// Great-circle distance in meters.
double haversine_m(const LatLon& a, const LatLon& b);

double arc_length_m(std::span<const LatLon> line);

// Initial bearing in degrees, [0, 360).
double bearing_deg(const LatLon& a, const LatLon& b);

struct Projection {
  LatLon point;
  double distance_m = 0.0;   // great-circle distance from the query point
  double offset_m = 0.0;     // arc length from the polyline start
  std::size_t segment = 0;   // index of the segment holding the point
};

// Closest point on a polyline. Each segment is treated in a local
// equirectangular frame centred on the query, which is accurate to well under
// a millimetre at street scale.
Projection project_onto(std::span<const LatLon> line, const LatLon& q);

// Point at a given arc length along the polyline (clamped to its ends).
LatLon interpolate(std::span<const LatLon> line, double offset_m);

// Ray casting in lon/lat; vertices are not required to close the ring.
bool point_in_polygon(std::span<const LatLon> ring, const LatLon& p);

bool polyline_intersects_polygon(std::span<const LatLon> line,
                                 std::span<const LatLon> ring);

struct BBox {
  double min_lat = 0.0, min_lon = 0.0, max_lat = 0.0, max_lon = 0.0;
  bool contains(const LatLon& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon &&
           p.lon <= max_lon;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

bool polyline_intersects_bbox(std::span<const LatLon> line, const BBox& box);

}  // namespace bikerisk::geo
