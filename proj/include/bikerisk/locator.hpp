#pragma once

#include <memory>
#include <vector>

#include "bikerisk/error.hpp"
#include "bikerisk/geo.hpp"
#include "bikerisk/street_graph.hpp"

namespace bikerisk::graph {

inline constexpr double kDefaultSnapRadiusM = 50.0;

struct Snap {
  EdgeId edge = 0;
  geo::LatLon point;
  double offset_m = 0.0;
  double distance_m = 0.0;
};

class UnsnappableError : public DataError {
 public:
  explicit UnsnappableError(double radius_m);
  double radius_m() const { return radius_m_; }

 private:
  double radius_m_;
};

// R-tree over edge segments. Holds a reference to the graph, which must
// outlive the locator.
class EdgeLocator {
 public:
  explicit EdgeLocator(const StreetGraph& graph);
  ~EdgeLocator();
  EdgeLocator(EdgeLocator&&) noexcept;
  EdgeLocator& operator=(EdgeLocator&&) noexcept;

  // Closest edge by great-circle distance; ties within 1e-9 m go to the lower
  // edge id. Throws UnsnappableError beyond the radius.
  Snap nearest(const geo::LatLon& query, double radius_m = kDefaultSnapRadiusM) const;

  // Edges whose polyline intersects the box, ascending by id.
  std::vector<EdgeId> edges_in_bbox(const geo::BBox& box) const;

  const StreetGraph& graph() const { return *graph_; }

 private:
  struct Index;
  const StreetGraph* graph_;
  std::unique_ptr<Index> index_;
};

Snap nearest_edge(const StreetGraph& graph, double lat, double lon,
                  double radius_m = kDefaultSnapRadiusM);

}  // namespace bikerisk::graph
