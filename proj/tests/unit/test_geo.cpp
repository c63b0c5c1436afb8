#include "doctest.h"

#include <random>

#include "bikerisk/geo.hpp"
#include "support.hpp"

using namespace bikerisk::geo;
using test_support::offset;

TEST_CASE("haversine matches known distances") {
  // one degree of latitude on the mean sphere
  CHECK(haversine_m({0, 0}, {1, 0}) == doctest::Approx(111195.08).epsilon(1e-6));
  CHECK(haversine_m({51.5, -0.1}, {51.5, -0.1}) == 0.0);
  const LatLon a{40.44, -80.0}, b{42.35, -71.06};
  CHECK(haversine_m(a, b) == doctest::Approx(haversine_m(b, a)));
}

TEST_CASE("bearing of cardinal directions") {
  const LatLon o{45.0, 7.0};
  CHECK(bearing_deg(o, offset(o, 100, 0)) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bearing_deg(o, offset(o, 0, 100)) == doctest::Approx(90.0).epsilon(1e-4));
  CHECK(bearing_deg(o, offset(o, -100, 0)) == doctest::Approx(180.0).epsilon(1e-6));
  CHECK(bearing_deg(o, offset(o, 0, -100)) == doctest::Approx(270.0).epsilon(1e-4));
}

TEST_CASE("projection onto a polyline") {
  const LatLon o{51.5, -0.12};
  const Polyline line{o, offset(o, 0, 100), offset(o, 100, 100)};
  SUBCASE("interior of the first segment") {
    const auto p = project_onto(line, offset(o, 10, 40));
    CHECK(p.segment == 0);
    CHECK(p.distance_m == doctest::Approx(10.0).epsilon(1e-4));
    CHECK(p.offset_m == doctest::Approx(40.0).epsilon(1e-4));
  }
  SUBCASE("beyond the end clamps to the last vertex") {
    const auto p = project_onto(line, offset(o, 130, 100));
    CHECK(p.segment == 1);
    CHECK(p.distance_m == doctest::Approx(30.0).epsilon(1e-4));
    CHECK(p.offset_m == doctest::Approx(arc_length_m(line)).epsilon(1e-9));
  }
  SUBCASE("a point on the line projects onto itself") {
    const auto q = interpolate(line, 150.0);
    const auto p = project_onto(line, q);
    CHECK(p.distance_m < 1e-6);
    CHECK(p.offset_m == doctest::Approx(150.0).epsilon(1e-6));
  }
}

TEST_CASE("interpolate clamps and is monotone in arc length") {
  const LatLon o{40.0, -80.0};
  const Polyline line{o, offset(o, 0, 50), offset(o, 50, 50)};
  CHECK(interpolate(line, -5.0) == line.front());
  CHECK(interpolate(line, 1e6) == line.back());
  double prev = -1.0;
  for (double s = 0; s <= 100.0; s += 7.5) {
    const double along = project_onto(line, interpolate(line, s)).offset_m;
    CHECK(along > prev);
    prev = along;
  }
}

TEST_CASE("point in polygon and polyline intersection") {
  const LatLon o{42.35, -71.06};
  const Polyline square{o, offset(o, 0, 100), offset(o, 100, 100), offset(o, 100, 0)};
  CHECK(point_in_polygon(square, offset(o, 50, 50)));
  CHECK_FALSE(point_in_polygon(square, offset(o, 150, 50)));
  // crosses the square without a vertex inside
  const Polyline through{offset(o, 50, -50), offset(o, 50, 150)};
  CHECK(polyline_intersects_polygon(through, square));
  const Polyline outside{offset(o, 150, -50), offset(o, 150, 150)};
  CHECK_FALSE(polyline_intersects_polygon(outside, square));

  BBox box{o.lat, o.lon, offset(o, 100, 100).lat, offset(o, 100, 100).lon};
  CHECK(box.contains(offset(o, 10, 10)));
  CHECK(polyline_intersects_bbox(through, box));
  CHECK_FALSE(polyline_intersects_bbox(outside, box));
}

TEST_CASE("arc length is additive") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> step(-80.0, 80.0);
  const LatLon o{40.44, -80.0};
  Polyline line{o};
  double n = 0, e = 0;
  for (int i = 0; i < 20; ++i) {
    n += step(rng);
    e += step(rng);
    line.push_back(offset(o, n, e));
  }
  double sum = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) sum += haversine_m(line[i - 1], line[i]);
  CHECK(arc_length_m(line) == doctest::Approx(sum).epsilon(1e-12));
}
