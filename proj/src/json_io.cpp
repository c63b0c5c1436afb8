#include "bikerisk/json_io.hpp"

#include <cmath>

#include "bikerisk/error.hpp"

namespace bikerisk::json_io {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::vector<geo::LatLon> polygon_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw UsageError("polygon must be an array of [lon, lat] pairs");
  std::vector<geo::LatLon> ring;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw UsageError("polygon vertices must be [lon, lat] number pairs");
    }
    ring.push_back({p[1].get<double>(), p[0].get<double>()});
  }
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (ring.size() < 3) throw UsageError("polygon needs at least 3 distinct vertices");
  return ring;
}

std::vector<geo::LatLon> region_from_json(const nlohmann::json& j) {
  if (j.is_array()) return polygon_from_json(j);
  if (!j.is_object() || !j.contains("type")) throw UsageError("region must be a ring or a GeoJSON Polygon");
  const auto type = j.at("type");
  if (type == "Feature" && j.contains("geometry")) return region_from_json(j.at("geometry"));
  if (type == "Polygon" && j.contains("coordinates") && j.at("coordinates").is_array() &&
      !j.at("coordinates").empty()) {
    return polygon_from_json(j.at("coordinates").at(0));
  }
  throw UsageError("region must be a ring or a GeoJSON Polygon");
}

std::vector<scenario::Edit> edits_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw UsageError("edits must be a JSON array");
  std::vector<scenario::Edit> edits;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("select") || !item.contains("set")) {
      throw UsageError("each edit needs \"select\" and \"set\"");
    }
    scenario::Edit e;
    const auto& sel = item.at("select");
    if (!sel.is_object()) throw UsageError("\"select\" must be an object");
    try {
      if (sel.contains("edge_ids")) {
        e.select.by_ids = true;
        e.select.edge_ids = sel.at("edge_ids").get<std::vector<graph::EdgeId>>();
      } else {
        if (sel.contains("classes")) e.select.classes = sel.at("classes").get<std::vector<std::string>>();
        if (sel.contains("exclude_classes")) {
          e.select.exclude_classes = sel.at("exclude_classes").get<std::vector<std::string>>();
        }
        if (sel.contains("polygon")) e.select.polygon = polygon_from_json(sel.at("polygon"));
        if (e.select.classes.empty() && e.select.exclude_classes.empty() && e.select.polygon.empty()) {
          throw UsageError("selector needs edge_ids, classes, exclude_classes or polygon");
        }
      }
      const auto& set = item.at("set");
      if (!set.is_object() || set.empty()) throw UsageError("\"set\" must be a non-empty object");
      for (const auto& [key, value] : set.items()) {
        if (key == "bikelane") {
          e.set.bikelane = value.get<bool>();
        } else if (key == "speed_limit_kmh") {
          e.set.speed_limit_kmh = value.get<double>();
          if (!(*e.set.speed_limit_kmh > 0.0)) throw UsageError("speed_limit_kmh must be positive");
        } else if (key == "width_m") {
          e.set.width_m = value.get<double>();
          if (!(*e.set.width_m > 0.0)) throw UsageError("width_m must be positive");
        } else {
          throw UsageError("unknown edit field '" + key + "'");
        }
      }
    } catch (const nlohmann::json::exception& ex) {
      throw UsageError(std::string("malformed edit: ") + ex.what());
    }
    edits.push_back(std::move(e));
  }
  return edits;
}

Json features_json(const graph::SegmentFeatures& f) {
  Json j;
  j["speed_limit_kmh"] = f.speed_limit_kmh;
  j["width_m"] = f.width_m;
  j["dist_intersect_m"] = f.dist_intersect_m;
  j["hilliness"] = graph::to_string(f.hilliness);
  j["topology"] = graph::to_string(f.topology);
  j["bikelane"] = f.bikelane;
  j["betweenness"] = f.betweenness;
  return j;
}

Json wald_json(const model::FittedModel& m) {
  Json rows = Json::array();
  for (const auto& r : model::wald_table(m)) {
    Json j;
    j["column"] = r.column;
    j["estimate"] = number_or_null(r.estimate);
    j["se"] = number_or_null(r.se);
    j["z"] = number_or_null(r.z);
    j["p"] = number_or_null(r.p);
    j["ci95"] = {number_or_null(r.ci_low), number_or_null(r.ci_high)};
    rows.push_back(std::move(j));
  }
  return rows;
}

Json provenance_json(const graph::Provenance& p, std::size_t edge_count) {
  Json j;
  j["source_sha256"] = p.source_sha256;
  j["edges"] = edge_count;
  j["bbox"] = {p.bbox.min_lon, p.bbox.min_lat, p.bbox.max_lon, p.bbox.max_lat};
  return j;
}

Json scenario_geojson(const scenario::ScenarioResult& r) {
  Json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = Json::array();
  for (const auto& p : r.points) {
    Json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", {p.sample.point.lon, p.sample.point.lat}}};
    Json props;
    props["edge_id"] = p.sample.edge;
    props["baseline_s"] = p.baseline_s;
    props["scenario_s"] = p.scenario_s;
    props["delta"] = p.delta();
    f["properties"] = std::move(props);
    fc["features"].push_back(std::move(f));
  }
  return fc;
}

Json scenario_result_json(const scenario::ScenarioResult& r) {
  Json j;
  Json region = Json::array();
  for (const auto& v : r.region) region.push_back({v.lon, v.lat});
  j["region"] = std::move(region);
  j["n_points"] = r.points.size();
  j["mean_baseline"] = r.mean_baseline;
  j["mean_scenario"] = r.mean_scenario;
  j["relative_change"] = r.relative_change;
  j["relative_change_pct"] = scenario::format_percent(r.relative_change);
  Json reports = Json::array();
  for (const auto& rep : r.reports) {
    Json e;
    e["matched"] = rep.matched;
    e["changed"] = rep.changed;
    if (!rep.warning.empty()) e["warning"] = rep.warning;
    reports.push_back(std::move(e));
  }
  j["edits"] = std::move(reports);
  j["geojson"] = scenario_geojson(r);
  return j;
}

}  // namespace bikerisk::json_io
