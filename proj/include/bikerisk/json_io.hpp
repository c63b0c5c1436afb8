#pragma once

// JSON conversions shared by the CLI, the HTTP service and the bindings.

#include <vector>

#include "json.hpp"

#include "bikerisk/evaluation.hpp"
#include "bikerisk/features.hpp"
#include "bikerisk/risk_model.hpp"
#include "bikerisk/scenario.hpp"

namespace bikerisk::json_io {

using Json = nlohmann::ordered_json;

// [[lon, lat], ...]; throws UsageError on malformed input.
std::vector<geo::LatLon> polygon_from_json(const nlohmann::json& j);

// Accepts a bare ring, a GeoJSON Polygon, or a Feature wrapping one.
std::vector<geo::LatLon> region_from_json(const nlohmann::json& j);

// Edits document: array of {"select": {...}, "set": {...}}.
std::vector<scenario::Edit> edits_from_json(const nlohmann::json& j);

Json features_json(const graph::SegmentFeatures& f);
Json wald_json(const model::FittedModel& m);
Json provenance_json(const graph::Provenance& p, std::size_t edge_count);

// FeatureCollection of sample points with baseline_s, scenario_s, delta.
Json scenario_geojson(const scenario::ScenarioResult& r);
// Summary plus the GeoJSON under "geojson".
Json scenario_result_json(const scenario::ScenarioResult& r);

}  // namespace bikerisk::json_io
