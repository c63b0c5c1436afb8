#include "bikerisk/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bikerisk::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Xy {
  double x;
  double y;
};

// Local equirectangular frame centred on `origin`, in meters.
Xy to_local(const LatLon& origin, const LatLon& p) {
  const double k = kEarthRadiusM * kDegToRad;
  return {(p.lon - origin.lon) * std::cos(origin.lat * kDegToRad) * k,
          (p.lat - origin.lat) * k};
}

double cross(const LatLon& o, const LatLon& a, const LatLon& b) {
  return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

bool on_segment(const LatLon& a, const LatLon& b, const LatLon& p) {
  return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) &&
         std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat);
}

bool segments_intersect(const LatLon& p1, const LatLon& p2, const LatLon& q1,
                        const LatLon& q2) {
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

}  // namespace

double haversine_m(const LatLon& a, const LatLon& b) {
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(a.lat * kDegToRad) *
                                 std::cos(b.lat * kDegToRad) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double arc_length_m(std::span<const LatLon> line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    total += haversine_m(line[i - 1], line[i]);
  }
  return total;
}

double bearing_deg(const LatLon& a, const LatLon& b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double y = std::sin(dlon) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) -
                   std::sin(phi1) * std::cos(phi2) * std::cos(dlon);
  double deg = std::atan2(y, x) / kDegToRad;
  if (deg < 0) deg += 360.0;
  return deg;
}

Projection project_onto(std::span<const LatLon> line, const LatLon& q) {
  Projection best;
  if (line.empty()) return best;
  if (line.size() == 1) {
    best.point = line.front();
    best.distance_m = haversine_m(q, line.front());
    return best;
  }
  bool found = false;
  double prefix = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const LatLon& a = line[i];
    const LatLon& b = line[i + 1];
    const Xy pa = to_local(q, a);
    const Xy pb = to_local(q, b);
    const double dx = pb.x - pa.x;
    const double dy = pb.y - pa.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) {
      t = std::clamp(-(pa.x * dx + pa.y * dy) / len2, 0.0, 1.0);
    }
    LatLon snapped;
    if (t == 0.0) {
      snapped = a;
    } else if (t == 1.0) {
      snapped = b;
    } else {
      snapped = {a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
    }
    const double dist = haversine_m(q, snapped);
    if (!found || dist < best.distance_m) {
      found = true;
      best.point = snapped;
      best.distance_m = dist;
      best.offset_m = prefix + haversine_m(a, snapped);
      best.segment = i;
    }
    prefix += haversine_m(a, b);
  }
  return best;
}

LatLon interpolate(std::span<const LatLon> line, double offset_m) {
  if (line.empty()) return {};
  if (offset_m <= 0.0) return line.front();
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double seg = haversine_m(line[i], line[i + 1]);
    if (walked + seg >= offset_m && seg > 0.0) {
      const double t = (offset_m - walked) / seg;
      return {line[i].lat + t * (line[i + 1].lat - line[i].lat),
              line[i].lon + t * (line[i + 1].lon - line[i].lon)};
    }
    walked += seg;
  }
  return line.back();
}

bool point_in_polygon(std::span<const LatLon> ring, const LatLon& p) {
  bool inside = false;
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const LatLon& a = ring[i];
    const LatLon& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

bool polyline_intersects_polygon(std::span<const LatLon> line,
                                 std::span<const LatLon> ring) {
  if (ring.size() < 3) return false;
  for (const auto& p : line) {
    if (point_in_polygon(ring, p)) return true;
  }
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (segments_intersect(line[i], line[i + 1], ring[j], ring[(j + 1) % n])) {
        return true;
      }
    }
  }
  return false;
}

bool polyline_intersects_bbox(std::span<const LatLon> line, const BBox& box) {
  const LatLon ring[] = {{box.min_lat, box.min_lon},
                         {box.min_lat, box.max_lon},
                         {box.max_lat, box.max_lon},
                         {box.max_lat, box.min_lon}};
  for (const auto& p : line) {
    if (box.contains(p)) return true;
  }
  return polyline_intersects_polygon(line, ring);
}

}  // namespace bikerisk::geo
