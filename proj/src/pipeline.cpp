#include "bikerisk/pipeline.hpp"

#include <algorithm>

#include "bikerisk/error.hpp"

namespace bikerisk::pipeline {

FeaturizeResult featurize_records(const graph::StreetGraph& graph,
                                  const graph::BetweennessResult& betweenness,
                                  std::span<const ingest::AccidentRecord> records,
                                  double snap_radius_m, const graph::FeatureConfig& config) {
  graph::EdgeLocator locator(graph);
  FeaturizeResult out;
  out.rows.reserve(records.size());
  for (const auto& r : records) {
    try {
      const auto snap = locator.nearest({r.latitude, r.longitude}, snap_radius_m);
      model::LabeledRow row;
      row.id = r.id;
      row.date = r.date;
      row.features = graph::segment_features(graph, betweenness, snap.edge, snap.point, config);
      row.label = r.severity == ingest::Severity::Severe ? 1 : 0;
      out.rows.push_back(std::move(row));
    } catch (const graph::UnsnappableError& e) {
      out.skipped.push_back({r.id, e.what()});
    }
  }
  return out;
}

std::vector<model::LabeledRow> filter_dates(std::span<const model::LabeledRow> rows,
                                            const std::optional<ingest::Date>& from,
                                            const std::optional<ingest::Date>& to) {
  if (from && to && *to < *from) throw UsageError("window end precedes its start");
  std::vector<model::LabeledRow> out;
  for (const auto& r : rows) {
    if ((from || to) && !r.date) continue;
    if (from && *r.date < *from) continue;
    if (to && *r.date > *to) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<graph::SegmentFeatures> features_of(std::span<const model::LabeledRow> rows) {
  std::vector<graph::SegmentFeatures> f;
  f.reserve(rows.size());
  for (const auto& r : rows) f.push_back(r.features);
  return f;
}

std::vector<int> labels_of(std::span<const model::LabeledRow> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (const auto& r : rows) y.push_back(r.label);
  return y;
}

model::FittedModel fit_rows(std::span<const model::LabeledRow> rows, std::string city,
                            const model::FitOptions& options, model::FitDiagnostics* diagnostics) {
  if (rows.empty()) throw DataError("no training rows");
  const auto features = features_of(rows);
  const auto labels = labels_of(rows);
  auto [design, scaling] = model::build_design(features, labels, model::FitScaling{});
  auto m = model::fit_logistic(design, options, diagnostics);
  m.city = std::move(city);
  m.scaling = std::move(scaling);
  for (const auto& r : rows) {
    if (!r.date) continue;
    if (!m.train_from || *r.date < *m.train_from) m.train_from = r.date;
    if (!m.train_to || *r.date > *m.train_to) m.train_to = r.date;
  }
  return m;
}

}  // namespace bikerisk::pipeline
