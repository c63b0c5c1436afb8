#pragma once

// Small helpers shared by the unit tests.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "bikerisk/geo.hpp"
#include "bikerisk/street_graph.hpp"

namespace test_support {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(BIKERISK_FIXTURES) / rel;
}

// Point `north_m`, `east_m` away from the origin on a local tangent plane.
inline bikerisk::geo::LatLon offset(const bikerisk::geo::LatLon& o, double north_m, double east_m) {
  constexpr double r = 6371008.8;
  constexpr double deg = 180.0 / 3.14159265358979323846;
  return {o.lat + north_m / r * deg, o.lon + east_m / (r * std::cos(o.lat / deg)) * deg};
}

// Minimal OSM document builder for graph tests.
struct OsmBuilder {
  std::string body;
  void node(long long id, const bikerisk::geo::LatLon& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "<node id=\"%lld\" lat=\"%.10f\" lon=\"%.10f\"/>\n", id, p.lat, p.lon);
    body += buf;
  }
  void way(long long id, std::initializer_list<long long> refs,
           std::initializer_list<std::pair<std::string, std::string>> tags) {
    body += "<way id=\"" + std::to_string(id) + "\">\n";
    for (auto r : refs) body += "<nd ref=\"" + std::to_string(r) + "\"/>\n";
    for (const auto& [k, v] : tags) body += "<tag k=\"" + k + "\" v=\"" + v + "\"/>\n";
    body += "</way>\n";
  }
  std::string xml() const { return "<?xml version=\"1.0\"?>\n<osm version=\"0.6\">\n" + body + "</osm>\n"; }
};

}  // namespace test_support
