#include "doctest.h"

#include "bikerisk/betweenness.hpp"
#include "bikerisk/features.hpp"
#include "bikerisk/street_graph.hpp"
#include "support.hpp"

using namespace bikerisk;
using namespace bikerisk::graph;
using test_support::offset;
using test_support::OsmBuilder;

namespace {

const geo::LatLon kOrigin{42.35, -71.06};

// A T junction at node 2: a straight 200 m street 1-2-3 and a spur 2-4,
// plus a dead-end bent street 5-6-7 that touches nothing.
StreetGraph t_junction() {
  OsmBuilder osm;
  osm.node(1, offset(kOrigin, 0, -200));
  osm.node(2, kOrigin);
  osm.node(3, offset(kOrigin, 0, 200));
  osm.node(4, offset(kOrigin, 150, 0));
  osm.node(5, offset(kOrigin, -300, 0));
  osm.node(6, offset(kOrigin, -260, 50));
  osm.node(7, offset(kOrigin, -300, 100));
  osm.way(1, {1, 2, 3}, {{"highway", "primary"}, {"maxspeed", "40"}, {"width", "9"}, {"cycleway", "track"}});
  osm.way(2, {2, 4}, {{"highway", "residential"}});
  osm.way(3, {5, 6, 7}, {{"highway", "service"}});
  auto g = build_graph_from_xml(osm.xml());
  impute_missing_attributes(g);
  return g;
}

}  // namespace

TEST_CASE("straight and curved segments") {
  const auto g = t_junction();
  CHECK(sinuosity(g.edge(0)) == doctest::Approx(1.0).epsilon(1e-6));
  const auto b = edge_betweenness(g);
  CHECK(segment_features(g, b, 0, g.edge(0).geometry[0]).topology == Topology::Straight);
  CHECK(sinuosity(g.edge(3)) > 1.05);
  CHECK(segment_features(g, b, 3, g.edge(3).geometry[0]).topology == Topology::Curved);
}

TEST_CASE("distance to the nearest intersection") {
  const auto g = t_junction();
  const auto b = edge_betweenness(g);
  // edge 0 runs 1 -> 2 where node 2 is the junction
  CHECK(segment_features(g, b, 0, g.node(2).pos).dist_intersect_m == 0.0);
  const auto p = offset(kOrigin, 0, -150);
  CHECK(segment_features(g, b, 0, p).dist_intersect_m == doctest::Approx(150.0).epsilon(1e-4));
  // dead-end street without a junction falls back to the nearer endpoint
  const auto q = g.edge(3).geometry.front();
  CHECK(segment_features(g, b, 3, q).dist_intersect_m == 0.0);
}

TEST_CASE("attributes and betweenness are read from the edge") {
  const auto g = t_junction();
  const auto b = edge_betweenness(g);
  const auto f = segment_features(g, b, 0, g.edge(0).geometry[0]);
  CHECK(f.speed_limit_kmh == 40.0);
  CHECK(f.width_m == 9.0);
  CHECK(f.bikelane);
  CHECK(f.betweenness == b.beta[0]);
  const auto r = segment_features(g, b, 2, g.edge(2).geometry[0]);
  CHECK(r.speed_limit_kmh == default_speed_kmh("residential"));
  CHECK_FALSE(r.bikelane);
}

TEST_CASE("hilliness from elevation") {
  OsmBuilder osm;
  osm.node(1, kOrigin);
  osm.node(2, offset(kOrigin, 0, 200));
  osm.node(3, offset(kOrigin, 0, 400));
  osm.way(1, {1, 2}, {{"highway", "residential"}});
  osm.way(2, {2, 3}, {{"highway", "residential"}});
  auto g = build_graph_from_xml(osm.xml());
  // the ways end at node 2, so they stay separate edges
  REQUIRE(g.edges().size() == 2);
  const auto b = edge_betweenness(g);
  CHECK(segment_features(g, b, 0, kOrigin).hilliness == Hilliness::Flat);  // no elevation yet
  g.set_elevation(1, 10.0);
  g.set_elevation(2, 20.0);
  g.set_elevation(3, 24.0);
  CHECK(*grade(g, g.edge(0)) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(segment_features(g, b, 0, kOrigin).hilliness == Hilliness::Hilly);
  CHECK(segment_features(g, b, 1, kOrigin).hilliness == Hilliness::Flat);
  FeatureConfig strict;
  strict.hilly_grade = 0.01;
  CHECK(segment_features(g, b, 1, kOrigin, strict).hilliness == Hilliness::Hilly);
}
