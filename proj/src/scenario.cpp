#include "bikerisk/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bikerisk/error.hpp"

namespace bikerisk::scenario {

namespace {

std::set<std::string> expand_classes(const std::vector<std::string>& classes) {
  std::set<std::string> out;
  for (const auto& c : classes) {
    if (c == "local") {
      out.insert({"residential", "living_street", "service"});
    } else {
      out.insert(c);
    }
  }
  return out;
}

}  // namespace

std::vector<EdgeId> resolve(const graph::StreetGraph& graph, const Selector& selector) {
  std::vector<EdgeId> out;
  if (selector.by_ids) {
    for (EdgeId id : selector.edge_ids) {
      if (id < graph.edges().size()) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  const auto include = expand_classes(selector.classes);
  const auto exclude = expand_classes(selector.exclude_classes);
  for (const auto& e : graph.edges()) {
    if (!include.empty() && !include.count(e.attrs.highway)) continue;
    if (exclude.count(e.attrs.highway)) continue;
    if (!selector.polygon.empty() && !geo::polyline_intersects_polygon(e.geometry, selector.polygon)) {
      continue;
    }
    out.push_back(e.id);
  }
  return out;
}

ApplyResult apply_edits(const graph::StreetGraph& baseline, std::span<const Edit> edits) {
  ApplyResult result{baseline, {}};
  for (const auto& edit : edits) {
    EditReport report;
    const auto ids = resolve(result.graph, edit.select);
    report.matched = ids.size();
    if (ids.empty()) report.warning = "selector matched no edges; edit is a no-op";
    for (EdgeId id : ids) {
      graph::EdgeAttributes a = result.graph.edge(id).attrs;
      const graph::EdgeAttributes before = a;
      if (edit.set.bikelane) a.bikelane = *edit.set.bikelane;
      if (edit.set.speed_limit_kmh) {
        a.speed_limit_kmh = *edit.set.speed_limit_kmh;
        a.speed_imputed = false;
      }
      if (edit.set.width_m) {
        a.width_m = *edit.set.width_m;
        a.width_imputed = false;
      }
      if (a != before) {
        result.graph.set_attributes(id, std::move(a));
        ++report.changed;
      }
    }
    result.reports.push_back(std::move(report));
  }
  return result;
}

std::vector<SamplePoint> sample_points(const graph::StreetGraph& graph,
                                       std::span<const geo::LatLon> region,
                                       const SamplingOptions& options) {
  std::vector<SamplePoint> out;
  if (options.supplied) {
    const graph::EdgeLocator locator(graph);
    struct Keyed {
      SamplePoint p;
      double offset;
      std::size_t order;
    };
    std::vector<Keyed> keyed;
    for (std::size_t i = 0; i < options.supplied->size(); ++i) {
      const auto& q = (*options.supplied)[i];
      if (!geo::point_in_polygon(region, q)) continue;
      try {
        const graph::Snap s = locator.nearest(q, options.snap_radius_m);
        keyed.push_back({{s.edge, s.point}, s.offset_m, i});
      } catch (const graph::UnsnappableError&) {
        // Points off the network carry no street features.
      }
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
      return std::tie(a.p.edge, a.offset, a.order) < std::tie(b.p.edge, b.offset, b.order);
    });
    for (const auto& k : keyed) out.push_back(k.p);
    return out;
  }
  for (const auto& e : graph.edges()) {
    if (!geo::polyline_intersects_polygon(e.geometry, region)) continue;
    if (options.densify_m <= 0.0) {
      out.push_back({e.id, geo::interpolate(e.geometry, e.length_m / 2.0)});
      continue;
    }
    bool any = false;
    for (double off = options.densify_m / 2.0; off < e.length_m; off += options.densify_m) {
      const geo::LatLon p = geo::interpolate(e.geometry, off);
      if (geo::point_in_polygon(region, p)) {
        out.push_back({e.id, p});
        any = true;
      }
    }
    if (!any) {
      const geo::LatLon mid = geo::interpolate(e.geometry, e.length_m / 2.0);
      if (geo::point_in_polygon(region, mid)) out.push_back({e.id, mid});
    }
  }
  return out;
}

AreaSafety area_safety(const model::FittedModel& model, const graph::StreetGraph& graph,
                       const graph::BetweennessResult& betweenness,
                       std::span<const SamplePoint> points, const graph::FeatureConfig& config) {
  if (points.empty()) throw DataError("region contains no street segments");
  AreaSafety out;
  out.safety.reserve(points.size());
  double sum = 0.0;
  for (const auto& p : points) {
    const auto f = graph::segment_features(graph, betweenness, p.edge, p.point, config);
    const double s = model::predict_safety(model, f);
    out.safety.push_back(s);
    sum += s;
  }
  out.mean = sum / static_cast<double>(points.size());
  return out;
}

ScenarioResult compare_scenarios(const model::FittedModel& model, const graph::StreetGraph& graph,
                                 const graph::BetweennessResult& betweenness,
                                 std::span<const geo::LatLon> region, std::span<const Edit> edits,
                                 const CompareOptions& options) {
  if (region.size() < 3) throw UsageError("region polygon needs at least 3 vertices");
  const auto points = sample_points(graph, region, options.sampling);
  if (points.empty()) throw DataError("region contains no street segments");

  ApplyResult applied = apply_edits(graph, edits);
  graph::BetweennessResult scenario_betweenness = betweenness;
  if (options.recompute_betweenness) {
    scenario_betweenness = graph::edge_betweenness(applied.graph);
  }
  const AreaSafety base = area_safety(model, graph, betweenness, points, options.features);
  const AreaSafety after = area_safety(model, applied.graph, scenario_betweenness, points, options.features);

  ScenarioResult r;
  r.region.assign(region.begin(), region.end());
  r.reports = std::move(applied.reports);
  for (std::size_t i = 0; i < points.size(); ++i) {
    r.points.push_back({points[i], base.safety[i], after.safety[i]});
  }
  r.mean_baseline = base.mean;
  r.mean_scenario = after.mean;
  r.relative_change = (after.mean - base.mean) / base.mean;
  return r;
}

std::string format_percent(double relative_change) {
  const long pct = std::lround(100.0 * relative_change);
  return std::to_string(pct) + "%";
}

}  // namespace bikerisk::scenario
