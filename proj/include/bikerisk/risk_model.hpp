#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bikerisk/error.hpp"
#include "bikerisk/features.hpp"

namespace bikerisk::model {

using Date = std::chrono::year_month_day;

// Fixed design layout: intercept, continuous features, indicators with
// flat/straight/without as the zero level, then the speed interactions.
enum Column : int {
  kIntercept = 0,
  kSpeed,
  kWidth,
  kBetweenness,
  kDistIntersect,
  kHilly,
  kCurved,
  kBikelane,
  kSpeedXBetweenness,
  kSpeedXBikelane,
  kSpeedXDistIntersect,
  kColumnCount
};

inline constexpr std::array<std::string_view, kColumnCount> kColumnNames = {
    "intercept",    "speed_limit", "width",   "betweenness",
    "dist_intersect", "hilly",     "curved",  "bikelane",
    "speed_limit:betweenness", "speed_limit:bikelane", "speed_limit:dist_intersect"};

inline constexpr std::array<Column, 4> kContinuousColumns = {kSpeed, kWidth, kBetweenness,
                                                             kDistIntersect};

std::vector<std::string> column_names();

struct ColumnScaling {
  double mean = 0.0;
  double sd = 1.0;
  friend bool operator==(const ColumnScaling&, const ColumnScaling&) = default;
};

struct ScalingMetadata {
  std::map<std::string, ColumnScaling> columns;  // continuous columns only
  std::vector<std::string> zero_variance;        // flagged under fit, left unscaled
  friend bool operator==(const ScalingMetadata&, const ScalingMetadata&) = default;
};

struct NoScaling {};
struct FitScaling {};
struct ApplyScaling {
  ScalingMetadata metadata;
};
using ScalingSpec = std::variant<NoScaling, FitScaling, ApplyScaling>;

struct DesignMatrix {
  Eigen::MatrixXd x;  // rows x kColumnCount
  Eigen::VectorXd y;  // 0 slight, 1 severe
};

// One standardized row from raw segment features.
Eigen::RowVectorXd design_row(const graph::SegmentFeatures& f, const ScalingMetadata& scaling);

std::pair<DesignMatrix, ScalingMetadata> build_design(std::span<const graph::SegmentFeatures> features,
                                                      std::span<const int> labels,
                                                      const ScalingSpec& scaling);

struct FitOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  // Ridge penalty on non-intercept coefficients; a separation fallback only.
  double ridge_lambda = 0.0;
};

struct FitDiagnostics {
  std::string status;  // converged | separation | max_iterations
  int iterations = 0;
  int step_halvings = 0;
  std::vector<double> log_likelihood_trace;  // starts at the zero vector
  Eigen::VectorXd fitted;                    // probabilities at the returned coefficients
  std::vector<std::string> inactive_columns; // identically zero, held at 0
  double ridge_lambda = 0.0;
};

struct FittedModel {
  std::string city;
  std::vector<std::string> columns;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::MatrixXd covariance;
  ScalingMetadata scaling;
  std::optional<Date> train_from;
  std::optional<Date> train_to;
  std::size_t n_train = 0;
  bool converged = false;
  double log_likelihood = 0.0;
};

class SingularDesignError : public DataError {
 public:
  explicit SingularDesignError(std::vector<std::string> columns);
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& a);
Eigen::VectorXd log_likelihood_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& a);

// Maximum likelihood by iteratively reweighted least squares with step
// halving, starting from zero. Complete separation returns the last iterate
// with converged == false rather than throwing.
FittedModel fit_logistic(const DesignMatrix& design, const FitOptions& options = {},
                         FitDiagnostics* diagnostics = nullptr);

double predict_linear(const FittedModel& model, const Eigen::RowVectorXd& row);
double predict_probability(const FittedModel& model, const Eigen::RowVectorXd& row);
// Risk of a severe outcome, strictly inside (0, 1).
double predict_risk(const FittedModel& model, const graph::SegmentFeatures& features);
inline double predict_safety(const FittedModel& model, const graph::SegmentFeatures& f) {
  return 1.0 - predict_risk(model, f);
}

struct WaldRow {
  std::string column;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

std::vector<WaldRow> wald_table(const FittedModel& model);

struct OverlapRow {
  std::string column;
  bool overlapping = false;
};

// 95% interval overlap per column.
std::vector<OverlapRow> ci_overlap(const FittedModel& a, const FittedModel& b);

struct ComparisonRow {
  std::string column;
  double difference = 0.0;
  double z = 0.0;
  double p = 1.0;
  bool significant = false;  // p < 0.05
  std::string_view verdict() const {
    return significant ? "significant difference" : "no detectable difference";
  }
};

// Per-column z = (b1 - b2) / sqrt(se1^2 + se2^2) with two-sided p.
std::vector<ComparisonRow> compare_models(const FittedModel& a, const FittedModel& b);

// Model file with exactly the documented keys. NaN becomes null.
void write_model_json(std::ostream& out, const FittedModel& model);
FittedModel read_model_json(std::istream& in);
FittedModel read_model_json(const std::filesystem::path& path);

// Labeled rows as stored in a design CSV: record id, date, the fixed column
// order, then y.
struct LabeledRow {
  std::string id;
  std::optional<Date> date;
  graph::SegmentFeatures features;
  int label = 0;
};

// Writes rows with raw (unscaled) feature values.
void write_design_csv(std::ostream& out, std::span<const LabeledRow> rows);
// Writes an already built (possibly standardized) design matrix.
void write_design_matrix_csv(std::ostream& out, const DesignMatrix& design);
std::vector<LabeledRow> read_design_csv(std::istream& in);
std::vector<LabeledRow> read_design_csv(const std::filesystem::path& path);

}  // namespace bikerisk::model
