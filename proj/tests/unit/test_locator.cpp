#include "doctest.h"

#include <random>

#include "bikerisk/locator.hpp"
#include "bikerisk/street_graph.hpp"
#include "support.hpp"

using namespace bikerisk;
using namespace bikerisk::graph;
using test_support::offset;
using test_support::OsmBuilder;

namespace {

const geo::LatLon kOrigin{40.44, -80.0};

// Two parallel east-west streets 40 m apart, the southern one with a bend.
StreetGraph two_streets() {
  OsmBuilder osm;
  osm.node(1, offset(kOrigin, 0, 0));
  osm.node(2, offset(kOrigin, 0, 100));
  osm.node(3, offset(kOrigin, 0, 200));
  osm.node(4, offset(kOrigin, 40, 0));
  osm.node(5, offset(kOrigin, 40, 200));
  osm.way(1, {1, 2, 3}, {{"highway", "residential"}});
  osm.way(2, {4, 5}, {{"highway", "residential"}});
  return build_graph_from_xml(osm.xml());
}

}  // namespace

TEST_CASE("query on a vertex returns that edge with the arc length offset") {
  const auto g = two_streets();
  const auto s = nearest_edge(g, g.edge(0).geometry[1].lat, g.edge(0).geometry[1].lon);
  CHECK(s.edge == 0);
  CHECK(s.distance_m < 1e-6);
  CHECK(s.offset_m == doctest::Approx(geo::haversine_m(g.edge(0).geometry[0], g.edge(0).geometry[1])).epsilon(1e-6));
}

TEST_CASE("equidistant query goes to the lower edge id") {
  SUBCASE("duplicate geometry") {
    OsmBuilder osm;
    osm.node(1, kOrigin);
    osm.node(2, offset(kOrigin, 0, 100));
    osm.way(1, {1, 2}, {{"highway", "residential"}});
    osm.way(2, {2, 1}, {{"highway", "service"}});
    const auto g = build_graph_from_xml(osm.xml());
    const auto q = offset(kOrigin, 12, 30);
    CHECK(nearest_edge(g, q.lat, q.lon).edge == 0);
  }
  SUBCASE("mirror-image streets along meridians") {
    const geo::LatLon o{40.0, -80.0};
    OsmBuilder osm;
    osm.node(1, {o.lat, o.lon + 0.000125});
    osm.node(2, {o.lat + 0.001, o.lon + 0.000125});
    osm.node(3, {o.lat, o.lon - 0.000125});
    osm.node(4, {o.lat + 0.001, o.lon - 0.000125});
    osm.way(1, {1, 2}, {{"highway", "residential"}});
    osm.way(2, {3, 4}, {{"highway", "residential"}});
    const auto g = build_graph_from_xml(osm.xml());
    const auto s = nearest_edge(g, o.lat + 0.0005, o.lon);
    CHECK(s.edge == 0);
    CHECK(s.distance_m == doctest::Approx(10.65).epsilon(1e-2));
  }
}

TEST_CASE("far queries are unsnappable") {
  const auto g = two_streets();
  const auto far = offset(kOrigin, 240, 100);
  CHECK_THROWS_WITH_AS(nearest_edge(g, far.lat, far.lon), "no segment within 50 m", UnsnappableError);
  CHECK_NOTHROW(nearest_edge(g, far.lat, far.lon, 250.0));
}

TEST_CASE("locator agrees with a linear scan and is idempotent") {
  auto g = build_graph(test_support::fixture("pittsburgh/map.osm"));
  EdgeLocator loc(g);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coord(-60.0, 1100.0);
  const geo::LatLon o{40.44, -80.0};
  int snapped = 0;
  for (int i = 0; i < 300; ++i) {
    const auto q = offset(o, coord(rng), coord(rng));
    double best = 1e300;
    EdgeId best_id = 0;
    for (const auto& e : g.edges()) {
      const double d = geo::project_onto(e.geometry, q).distance_m;
      if (d < best - 1e-9) {
        best = d;
        best_id = e.id;
      }
    }
    if (best > kDefaultSnapRadiusM) {
      CHECK_THROWS_AS(loc.nearest(q), UnsnappableError);
      continue;
    }
    ++snapped;
    const auto s = loc.nearest(q);
    CHECK(s.edge == best_id);
    CHECK(s.distance_m == doctest::Approx(best).epsilon(1e-9));
    const auto again = loc.nearest(s.point);
    CHECK(again.edge == s.edge);
    CHECK(again.distance_m < 1e-6);
  }
  CHECK(snapped > 100);
}

TEST_CASE("edges in a bounding box") {
  const auto g = two_streets();
  EdgeLocator loc(g);
  const auto a = offset(kOrigin, 30, 50), b = offset(kOrigin, 50, 60);
  CHECK(loc.edges_in_bbox({a.lat, a.lon, b.lat, b.lon}) == std::vector<EdgeId>{1});
  const auto c = offset(kOrigin, -10, -10), d = offset(kOrigin, 50, 300);
  CHECK(loc.edges_in_bbox({c.lat, c.lon, d.lat, d.lon}) == std::vector<EdgeId>{0, 1});
  const auto e = offset(kOrigin, 500, 500), f = offset(kOrigin, 600, 600);
  CHECK(loc.edges_in_bbox({e.lat, e.lon, f.lat, f.lon}).empty());
}
