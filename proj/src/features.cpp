#include "bikerisk/features.hpp"

#include <cmath>
#include <limits>

#include "bikerisk/error.hpp"

namespace bikerisk::graph {

double sinuosity(const Edge& edge) {
  const double chord = geo::haversine_m(edge.geometry.front(), edge.geometry.back());
  if (chord <= 0.0) return std::numeric_limits<double>::infinity();
  return edge.length_m / chord;
}

std::optional<double> grade(const StreetGraph& graph, const Edge& edge) {
  const auto& a = graph.node(edge.u).elevation_m;
  const auto& b = graph.node(edge.v).elevation_m;
  if (!a || !b || edge.length_m <= 0.0) return std::nullopt;
  return std::abs(*b - *a) / edge.length_m;
}

SegmentFeatures segment_features(const StreetGraph& graph, const BetweennessResult& betweenness,
                                 EdgeId id, const geo::LatLon& snapped, const FeatureConfig& config) {
  const Edge& e = graph.edge(id);
  if (betweenness.beta.size() != graph.edges().size()) {
    throw DataError("betweenness was computed on a different graph");
  }
  SegmentFeatures f;
  f.speed_limit_kmh = e.attrs.speed_limit_kmh.value_or(default_speed_kmh(e.attrs.highway));
  f.width_m = e.attrs.width_m.value_or(default_width_m(e.attrs.highway));
  f.bikelane = e.attrs.bikelane;
  f.betweenness = betweenness.value(id);

  // Distance to the nearer intersection endpoint; dead-end chains with no
  // intersection endpoint fall back to the nearer endpoint.
  const Node& nu = graph.node(e.u);
  const Node& nv = graph.node(e.v);
  const double du = geo::haversine_m(snapped, nu.pos);
  const double dv = geo::haversine_m(snapped, nv.pos);
  const bool ju = graph.degree(e.u) >= 3;
  const bool jv = graph.degree(e.v) >= 3;
  if (ju && jv) {
    f.dist_intersect_m = std::min(du, dv);
  } else if (ju) {
    f.dist_intersect_m = du;
  } else if (jv) {
    f.dist_intersect_m = dv;
  } else {
    f.dist_intersect_m = std::min(du, dv);
  }

  f.topology = sinuosity(e) > config.curved_sinuosity ? Topology::Curved : Topology::Straight;
  const auto g = grade(graph, e);
  f.hilliness = g && *g > config.hilly_grade ? Hilliness::Hilly : Hilliness::Flat;
  return f;
}

std::string_view to_string(Hilliness h) { return h == Hilliness::Hilly ? "hilly" : "flat"; }
std::string_view to_string(Topology t) { return t == Topology::Curved ? "curved" : "straight"; }

}  // namespace bikerisk::graph
