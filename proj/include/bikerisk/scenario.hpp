#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bikerisk/betweenness.hpp"
#include "bikerisk/features.hpp"
#include "bikerisk/geo.hpp"
#include "bikerisk/locator.hpp"
#include "bikerisk/risk_model.hpp"
#include "bikerisk/street_graph.hpp"

namespace bikerisk::scenario {

using graph::EdgeId;

// Either an explicit id list, or a class/polygon predicate. The class token
// "local" stands for residential, living_street and service.
struct Selector {
  std::vector<EdgeId> edge_ids;
  bool by_ids = false;
  std::vector<std::string> classes;          // empty: any class
  std::vector<std::string> exclude_classes;
  std::vector<geo::LatLon> polygon;          // empty: anywhere
};

struct Change {
  std::optional<bool> bikelane;
  std::optional<double> speed_limit_kmh;
  std::optional<double> width_m;
};

struct Edit {
  Selector select;
  Change set;
};

struct EditReport {
  std::size_t matched = 0;
  std::size_t changed = 0;
  std::string warning;
};

struct ApplyResult {
  graph::StreetGraph graph;
  std::vector<EditReport> reports;
};

std::vector<EdgeId> resolve(const graph::StreetGraph& graph, const Selector& selector);

// Returns a modified copy; only edge attributes change.
ApplyResult apply_edits(const graph::StreetGraph& baseline, std::span<const Edit> edits);

struct SamplePoint {
  EdgeId edge = 0;
  geo::LatLon point;
};

struct SamplingOptions {
  // 0: one midpoint per edge intersecting the region; otherwise points every
  // densify_m meters along those edges, kept when inside the region.
  double densify_m = 0.0;
  // When set, these points are snapped and used instead (inside region only).
  std::optional<std::vector<geo::LatLon>> supplied;
  double snap_radius_m = graph::kDefaultSnapRadiusM;
};

// Deterministic order: by edge id, then position along the edge.
std::vector<SamplePoint> sample_points(const graph::StreetGraph& graph,
                                       std::span<const geo::LatLon> region,
                                       const SamplingOptions& options = {});

struct AreaSafety {
  std::vector<double> safety;
  double mean = 0.0;
};

AreaSafety area_safety(const model::FittedModel& model, const graph::StreetGraph& graph,
                       const graph::BetweennessResult& betweenness,
                       std::span<const SamplePoint> points,
                       const graph::FeatureConfig& config = {});

struct PointResult {
  SamplePoint sample;
  double baseline_s = 0.0;
  double scenario_s = 0.0;
  double delta() const { return scenario_s - baseline_s; }
};

struct ScenarioResult {
  std::vector<geo::LatLon> region;
  std::vector<PointResult> points;
  double mean_baseline = 0.0;
  double mean_scenario = 0.0;
  double relative_change = 0.0;  // (mean_scenario - mean_baseline) / mean_baseline
  std::vector<EditReport> reports;
};

struct CompareOptions {
  SamplingOptions sampling;
  bool recompute_betweenness = false;
  graph::FeatureConfig features;
};

ScenarioResult compare_scenarios(const model::FittedModel& model, const graph::StreetGraph& graph,
                                 const graph::BetweennessResult& betweenness,
                                 std::span<const geo::LatLon> region, std::span<const Edit> edits,
                                 const CompareOptions& options = {});

// Nearest whole percent, e.g. 0.2593 -> "26%".
std::string format_percent(double relative_change);

}  // namespace bikerisk::scenario
