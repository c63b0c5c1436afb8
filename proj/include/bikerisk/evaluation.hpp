#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bikerisk/risk_model.hpp"

namespace bikerisk::eval {

// Mean squared difference between forecast probability and binary outcome.
double brier_score(std::span<const double> probs, std::span<const int> labels);

// Brier score of always forecasting the training base rate.
double climatology_brier(std::span<const int> train_labels, std::span<const int> test_labels);

// 1 - bs / bs_ref; nullopt when the reference score is zero (undefined).
std::optional<double> brier_skill_score(double bs, double bs_ref);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  std::optional<double> mean_predicted;     // empty bins stay undefined
  std::optional<double> observed_fraction;
};

struct ReliabilityCurve {
  std::vector<CalibrationBin> bins;     // ten bins of width 0.1, last closed at 1
  std::vector<std::size_t> histogram;   // prediction counts per decile
};

ReliabilityCurve reliability_curve(std::span<const double> probs, std::span<const int> labels);

struct EvaluationReport {
  std::string train_city;
  std::string test_city;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  double brier = 0.0;
  double brier_ref = 0.0;
  std::optional<double> bss;
  ReliabilityCurve reliability;
};

inline constexpr double kDecisionThreshold = 0.5;

// Scores a model on an already built test design (columns must match).
EvaluationReport evaluate(const model::FittedModel& model, const model::DesignMatrix& test,
                          std::span<const int> train_labels, std::string test_city = {});

// Scores on raw features using the model's own stored standardization.
EvaluationReport evaluate_features(const model::FittedModel& model,
                                   std::span<const graph::SegmentFeatures> test_features,
                                   std::span<const int> test_labels,
                                   std::span<const int> train_labels, std::string test_city);

struct CityData {
  std::string city;
  model::FittedModel model;
  std::vector<int> train_labels;
  std::vector<graph::SegmentFeatures> test_features;
  std::vector<int> test_labels;
};

// Every ordered pair of distinct cities, training city major order.
std::vector<EvaluationReport> cross_evaluate(std::span<const CityData> cities);

// training_city,testing_city,accuracy,bs,bs_baseline,bss
void write_report_csv(std::ostream& out, std::span<const EvaluationReport> reports);
void write_report_json(std::ostream& out, const EvaluationReport& report);
// bin_lo,bin_hi,n,mean_pred,observed_frac
void write_reliability_csv(std::ostream& out, const ReliabilityCurve& curve);
void write_reliability_svg(std::ostream& out, const ReliabilityCurve& curve, const std::string& title);

}  // namespace bikerisk::eval
