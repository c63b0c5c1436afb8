#include "bikerisk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "bikerisk/csv.hpp"
#include "bikerisk/error.hpp"

namespace bikerisk::eval {

namespace {

constexpr int kBins = 10;

void check_labels(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  }
}

double base_rate(std::span<const int> labels) {
  double s = 0.0;
  for (int y : labels) s += y;
  return s / static_cast<double>(labels.size());
}

std::string optional_field(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : "";
}

}  // namespace

double brier_score(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw DataError("brier_score: length mismatch");
  if (probs.empty()) throw DataError("brier_score: no observations");
  check_labels(labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw DataError("brier_score: probability outside [0,1]");
    const double r = probs[i] - labels[i];
    sum += r * r;
  }
  return sum / static_cast<double>(probs.size());
}

double climatology_brier(std::span<const int> train_labels, std::span<const int> test_labels) {
  if (train_labels.empty() || test_labels.empty()) throw DataError("climatology_brier: empty labels");
  check_labels(train_labels);
  const std::vector<double> constant(test_labels.size(), base_rate(train_labels));
  return brier_score(constant, test_labels);
}

std::optional<double> brier_skill_score(double bs, double bs_ref) {
  if (bs_ref == 0.0) return std::nullopt;
  return 1.0 - bs / bs_ref;
}

ReliabilityCurve reliability_curve(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw DataError("reliability_curve: length mismatch");
  if (probs.empty()) throw DataError("reliability_curve: no observations");
  check_labels(labels);
  std::vector<double> sum_p(kBins, 0.0);
  std::vector<double> sum_y(kBins, 0.0);
  std::vector<std::size_t> count(kBins, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("reliability_curve: probability outside [0,1]");
    const int b = std::min(kBins - 1, static_cast<int>(std::floor(p * kBins)));
    sum_p[b] += p;
    sum_y[b] += labels[i];
    ++count[b];
  }
  ReliabilityCurve curve;
  for (int b = 0; b < kBins; ++b) {
    CalibrationBin bin;
    bin.lo = b / static_cast<double>(kBins);
    bin.hi = (b + 1) / static_cast<double>(kBins);
    bin.n = count[b];
    if (bin.n > 0) {
      bin.mean_predicted = sum_p[b] / static_cast<double>(bin.n);
      bin.observed_fraction = sum_y[b] / static_cast<double>(bin.n);
    }
    curve.bins.push_back(bin);
    curve.histogram.push_back(count[b]);
  }
  return curve;
}

EvaluationReport evaluate(const model::FittedModel& model, const model::DesignMatrix& test,
                          std::span<const int> train_labels, std::string test_city) {
  if (test.x.cols() != model.coefficients.size()) {
    throw DataError("test design has " + std::to_string(test.x.cols()) + " columns, model has " +
                    std::to_string(model.coefficients.size()));
  }
  if (test.x.rows() == 0) throw DataError("evaluate: empty test set");
  std::vector<double> probs(static_cast<std::size_t>(test.x.rows()));
  std::vector<int> labels(probs.size());
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < test.x.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    probs[k] = model::predict_probability(model, test.x.row(i));
    labels[k] = static_cast<int>(test.y[i]);
    const int predicted = probs[k] >= kDecisionThreshold ? 1 : 0;
    if (predicted == labels[k]) ++correct;
  }
  EvaluationReport r;
  r.train_city = model.city;
  r.test_city = test_city.empty() ? model.city : std::move(test_city);
  r.n_test = probs.size();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_test);
  r.brier = brier_score(probs, labels);
  r.brier_ref = climatology_brier(train_labels, labels);
  r.bss = brier_skill_score(r.brier, r.brier_ref);
  r.reliability = reliability_curve(probs, labels);
  return r;
}

EvaluationReport evaluate_features(const model::FittedModel& model,
                                   std::span<const graph::SegmentFeatures> test_features,
                                   std::span<const int> test_labels,
                                   std::span<const int> train_labels, std::string test_city) {
  auto [design, _] = model::build_design(test_features, test_labels,
                                         model::ApplyScaling{model.scaling});
  return evaluate(model, design, train_labels, std::move(test_city));
}

std::vector<EvaluationReport> cross_evaluate(std::span<const CityData> cities) {
  std::vector<EvaluationReport> out;
  for (const auto& train : cities) {
    for (const auto& test : cities) {
      if (&train == &test) continue;
      EvaluationReport r = evaluate_features(train.model, test.test_features, test.test_labels,
                                             train.train_labels, test.city);
      r.train_city = train.city;
      out.push_back(std::move(r));
    }
  }
  return out;
}

void write_report_csv(std::ostream& out, std::span<const EvaluationReport> reports) {
  csv::Writer w(out);
  w.row({"training_city", "testing_city", "accuracy", "bs", "bs_baseline", "bss"});
  for (const auto& r : reports) {
    w.row({r.train_city, r.test_city, csv::format_double(r.accuracy), csv::format_double(r.brier),
           csv::format_double(r.brier_ref), optional_field(r.bss)});
  }
}

void write_report_json(std::ostream& out, const EvaluationReport& r) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json doc;
  doc["training_city"] = r.train_city;
  doc["testing_city"] = r.test_city;
  doc["n_test"] = r.n_test;
  doc["accuracy"] = r.accuracy;
  doc["brier"] = r.brier;
  doc["brier_ref"] = r.brier_ref;
  doc["bss"] = opt(r.bss);
  auto bins = ordered_json::array();
  for (const auto& b : r.reliability.bins) {
    ordered_json j;
    j["lo"] = b.lo;
    j["hi"] = b.hi;
    j["n"] = b.n;
    j["mean_predicted"] = opt(b.mean_predicted);
    j["observed_fraction"] = opt(b.observed_fraction);
    bins.push_back(std::move(j));
  }
  doc["reliability"] = std::move(bins);
  doc["histogram"] = r.reliability.histogram;
  out << doc.dump(2) << '\n';
}

void write_reliability_csv(std::ostream& out, const ReliabilityCurve& curve) {
  csv::Writer w(out);
  w.row({"bin_lo", "bin_hi", "n", "mean_pred", "observed_frac"});
  for (const auto& b : curve.bins) {
    w.row({csv::format_double(b.lo), csv::format_double(b.hi), std::to_string(b.n),
           optional_field(b.mean_predicted), optional_field(b.observed_fraction)});
  }
}

void write_reliability_svg(std::ostream& out, const ReliabilityCurve& curve, const std::string& title) {
  constexpr double W = 420, H = 420, M = 50;
  const double plot = W - 2 * M;
  auto px = [&](double v) { return M + v * plot; };
  auto py = [&](double v) { return H - M - v * plot; };
  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << plot << "\" height=\"" << plot
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
    << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  std::size_t max_count = 1;
  for (auto c : curve.histogram) max_count = std::max(max_count, c);
  for (std::size_t b = 0; b < curve.histogram.size(); ++b) {
    const double h = 0.25 * static_cast<double>(curve.histogram[b]) / static_cast<double>(max_count);
    s << "<rect x=\"" << px(curve.bins[b].lo) << "\" y=\"" << py(h) << "\" width=\"" << plot / 10.0
      << "\" height=\"" << h * plot << "\" fill=\"#cfd8e3\"/>\n";
  }
  s << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (const auto& b : curve.bins) {
    if (b.n == 0) continue;
    s << px(*b.mean_predicted) << ',' << py(*b.observed_fraction) << ' ';
  }
  s << "\"/>\n";
  for (const auto& b : curve.bins) {
    if (b.n == 0) continue;
    s << "<circle cx=\"" << px(*b.mean_predicted) << "\" cy=\"" << py(*b.observed_fraction)
      << "\" r=\"3\" fill=\"#c0392b\"/>\n";
  }
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << "predicted probability of severe</text>\n";
  s << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << H / 2
    << ")\" text-anchor=\"middle\">observed severe fraction</text>\n";
  s << "</svg>\n";
  out << s.str();
}

}  // namespace bikerisk::eval
