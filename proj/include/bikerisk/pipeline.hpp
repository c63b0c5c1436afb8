#pragma once

// Glue between accident records, the street graph and design rows.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bikerisk/betweenness.hpp"
#include "bikerisk/features.hpp"
#include "bikerisk/ingest.hpp"
#include "bikerisk/locator.hpp"
#include "bikerisk/risk_model.hpp"

namespace bikerisk::pipeline {

struct Skipped {
  std::string id;
  std::string reason;
};

struct FeaturizeResult {
  std::vector<model::LabeledRow> rows;
  std::vector<Skipped> skipped;  // records farther than the snap radius
};

// Snaps each record to its nearest edge and attaches the edge's features.
// Row order follows the input.
FeaturizeResult featurize_records(const graph::StreetGraph& graph,
                                  const graph::BetweennessResult& betweenness,
                                  std::span<const ingest::AccidentRecord> records,
                                  double snap_radius_m = graph::kDefaultSnapRadiusM,
                                  const graph::FeatureConfig& config = {});

// Inclusive date window; rows without a date are dropped when a bound is set.
std::vector<model::LabeledRow> filter_dates(std::span<const model::LabeledRow> rows,
                                            const std::optional<ingest::Date>& from,
                                            const std::optional<ingest::Date>& to);

std::vector<graph::SegmentFeatures> features_of(std::span<const model::LabeledRow> rows);
std::vector<int> labels_of(std::span<const model::LabeledRow> rows);

// Builds a standardized design from rows, fits, and stamps city and window.
model::FittedModel fit_rows(std::span<const model::LabeledRow> rows, std::string city,
                            const model::FitOptions& options = {},
                            model::FitDiagnostics* diagnostics = nullptr);

}  // namespace bikerisk::pipeline
