#pragma once

#include <string_view>

#include "bikerisk/betweenness.hpp"
#include "bikerisk/geo.hpp"
#include "bikerisk/street_graph.hpp"

namespace bikerisk::graph {

enum class Hilliness { Flat, Hilly };
enum class Topology { Straight, Curved };

struct SegmentFeatures {
  double speed_limit_kmh = 0.0;
  double width_m = 0.0;
  double dist_intersect_m = 0.0;
  Hilliness hilliness = Hilliness::Flat;
  Topology topology = Topology::Straight;
  bool bikelane = false;
  double betweenness = 0.0;
  friend bool operator==(const SegmentFeatures&, const SegmentFeatures&) = default;
};

struct FeatureConfig {
  double curved_sinuosity = 1.05;  // curved iff arc/chord exceeds this
  double hilly_grade = 0.04;       // hilly iff |rise|/arc exceeds this
};

double sinuosity(const Edge& edge);
// nullopt without elevation at both endpoints.
std::optional<double> grade(const StreetGraph& graph, const Edge& edge);

// Features for a point already snapped onto `edge`. Unset speed or width
// falls back to the class defaults.
SegmentFeatures segment_features(const StreetGraph& graph, const BetweennessResult& betweenness,
                                 EdgeId edge, const geo::LatLon& snapped,
                                 const FeatureConfig& config = {});

std::string_view to_string(Hilliness h);
std::string_view to_string(Topology t);

}  // namespace bikerisk::graph
