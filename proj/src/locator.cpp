#include "bikerisk/locator.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace bikerisk::graph {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using Point = bg::model::point<double, 2, bg::cs::cartesian>;  // (lon, lat)
using Box = bg::model::box<Point>;
using Value = std::pair<Box, EdgeId>;

constexpr double kMetersPerDegreeLat = geo::kEarthRadiusM * std::numbers::pi / 180.0;
constexpr double kTieToleranceM = 1e-9;

std::string format_radius(double r) {
  std::ostringstream ss;
  ss << r;
  return ss.str();
}

}  // namespace

UnsnappableError::UnsnappableError(double radius_m)
    : DataError("no segment within " + format_radius(radius_m) + " m"), radius_m_(radius_m) {}

struct EdgeLocator::Index {
  bgi::rtree<Value, bgi::rstar<16>> tree;
};

EdgeLocator::EdgeLocator(const StreetGraph& graph) : graph_(&graph), index_(std::make_unique<Index>()) {
  std::vector<Value> values;
  for (const auto& e : graph.edges()) {
    for (std::size_t i = 0; i + 1 < e.geometry.size(); ++i) {
      const auto& a = e.geometry[i];
      const auto& b = e.geometry[i + 1];
      values.emplace_back(Box(Point(std::min(a.lon, b.lon), std::min(a.lat, b.lat)),
                              Point(std::max(a.lon, b.lon), std::max(a.lat, b.lat))),
                          e.id);
    }
    if (e.geometry.size() == 1) {
      const auto& a = e.geometry.front();
      values.emplace_back(Box(Point(a.lon, a.lat), Point(a.lon, a.lat)), e.id);
    }
  }
  index_->tree = bgi::rtree<Value, bgi::rstar<16>>(values.begin(), values.end());
}

EdgeLocator::~EdgeLocator() = default;
EdgeLocator::EdgeLocator(EdgeLocator&&) noexcept = default;
EdgeLocator& EdgeLocator::operator=(EdgeLocator&&) noexcept = default;

Snap EdgeLocator::nearest(const geo::LatLon& q, double radius_m) const {
  // Degree box slightly larger than the radius; exact distances decide.
  const double dlat = radius_m / kMetersPerDegreeLat * 1.01 + 1e-9;
  const double coslat = std::max(std::cos(q.lat * std::numbers::pi / 180.0), 1e-6);
  const double dlon = dlat / coslat;
  const Box query(Point(q.lon - dlon, q.lat - dlat), Point(q.lon + dlon, q.lat + dlat));

  std::vector<Value> hits;
  index_->tree.query(bgi::intersects(query), std::back_inserter(hits));
  std::set<EdgeId> candidates;
  for (const auto& h : hits) candidates.insert(h.second);

  std::optional<Snap> best;
  for (EdgeId id : candidates) {  // ascending id, so ties keep the lower id
    const Edge& e = graph_->edge(id);
    const geo::Projection p = geo::project_onto(e.geometry, q);
    if (p.distance_m > radius_m) continue;
    if (!best || p.distance_m < best->distance_m - kTieToleranceM) {
      best = Snap{id, p.point, p.offset_m, p.distance_m};
    }
  }
  if (!best) throw UnsnappableError(radius_m);
  return *best;
}

std::vector<EdgeId> EdgeLocator::edges_in_bbox(const geo::BBox& box) const {
  const Box query(Point(box.min_lon, box.min_lat), Point(box.max_lon, box.max_lat));
  std::vector<Value> hits;
  index_->tree.query(bgi::intersects(query), std::back_inserter(hits));
  std::set<EdgeId> candidates;
  for (const auto& h : hits) candidates.insert(h.second);
  std::vector<EdgeId> out;
  for (EdgeId id : candidates) {
    if (geo::polyline_intersects_bbox(graph_->edge(id).geometry, box)) out.push_back(id);
  }
  return out;
}

Snap nearest_edge(const StreetGraph& graph, double lat, double lon, double radius_m) {
  return EdgeLocator(graph).nearest({lat, lon}, radius_m);
}

}  // namespace bikerisk::graph
