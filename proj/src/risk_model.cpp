#include "bikerisk/risk_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "bikerisk/csv.hpp"
#include "bikerisk/ingest.hpp"
#include "bikerisk/stats.hpp"

namespace bikerisk::model {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

double column_value(const graph::SegmentFeatures& f, Column c) {
  switch (c) {
    case kSpeed: return f.speed_limit_kmh;
    case kWidth: return f.width_m;
    case kBetweenness: return f.betweenness;
    case kDistIntersect: return f.dist_intersect_m;
    default: throw std::logic_error("not a continuous column");
  }
}

}  // namespace

std::vector<std::string> column_names() {
  return {kColumnNames.begin(), kColumnNames.end()};
}

SingularDesignError::SingularDesignError(std::vector<std::string> columns)
    : DataError("singular information matrix; linearly dependent columns: " + join(columns)),
      columns_(std::move(columns)) {}

Eigen::RowVectorXd design_row(const graph::SegmentFeatures& f, const ScalingMetadata& scaling) {
  auto scaled = [&](Column c) {
    const auto it = scaling.columns.find(std::string(kColumnNames[c]));
    if (it == scaling.columns.end()) {
      throw DataError("scaling metadata lacks column " + std::string(kColumnNames[c]));
    }
    return (column_value(f, c) - it->second.mean) / it->second.sd;
  };
  Eigen::RowVectorXd r(kColumnCount);
  r[kIntercept] = 1.0;
  r[kSpeed] = scaled(kSpeed);
  r[kWidth] = scaled(kWidth);
  r[kBetweenness] = scaled(kBetweenness);
  r[kDistIntersect] = scaled(kDistIntersect);
  r[kHilly] = f.hilliness == graph::Hilliness::Hilly ? 1.0 : 0.0;
  r[kCurved] = f.topology == graph::Topology::Curved ? 1.0 : 0.0;
  r[kBikelane] = f.bikelane ? 1.0 : 0.0;
  r[kSpeedXBetweenness] = r[kSpeed] * r[kBetweenness];
  r[kSpeedXBikelane] = r[kSpeed] * r[kBikelane];
  r[kSpeedXDistIntersect] = r[kSpeed] * r[kDistIntersect];
  return r;
}

std::pair<DesignMatrix, ScalingMetadata> build_design(std::span<const graph::SegmentFeatures> features,
                                                      std::span<const int> labels,
                                                      const ScalingSpec& scaling) {
  if (features.size() != labels.size()) throw DataError("features and labels differ in length");
  ScalingMetadata meta;
  if (std::holds_alternative<ApplyScaling>(scaling)) {
    meta = std::get<ApplyScaling>(scaling).metadata;
  } else {
    const bool fit = std::holds_alternative<FitScaling>(scaling);
    const double n = static_cast<double>(features.size());
    for (Column c : kContinuousColumns) {
      const std::string name(kColumnNames[c]);
      ColumnScaling cs;
      if (fit) {
        double mean = 0.0;
        for (const auto& f : features) mean += column_value(f, c);
        mean = n > 0 ? mean / n : 0.0;
        double ss = 0.0;
        for (const auto& f : features) ss += (column_value(f, c) - mean) * (column_value(f, c) - mean);
        const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
          cs = {mean, sd};
        } else {
          meta.zero_variance.push_back(name);
        }
      }
      meta.columns[name] = cs;
    }
  }

  DesignMatrix d;
  d.x.resize(static_cast<Eigen::Index>(features.size()), kColumnCount);
  d.y.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
    d.x.row(static_cast<Eigen::Index>(i)) = design_row(features[i], meta);
    d.y[static_cast<Eigen::Index>(i)] = labels[i];
  }
  return {std::move(d), std::move(meta)};
}

double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& a) {
  const Eigen::VectorXd eta = x * a;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - stats::softplus(eta[i]);
  return ll;
}

Eigen::VectorXd log_likelihood_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& a) {
  const Eigen::VectorXd eta = x * a;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = y[i] - stats::logistic(eta[i]);
  return x.transpose() * resid;
}

FittedModel fit_logistic(const DesignMatrix& design, const FitOptions& options,
                         FitDiagnostics* diagnostics) {
  const Eigen::MatrixXd& x_full = design.x;
  const Eigen::VectorXd& y = design.y;
  const Eigen::Index n = x_full.rows();
  const Eigen::Index p_full = x_full.cols();
  if (y.size() != n) throw DataError("design and labels differ in length");
  if (n < p_full) throw DataError("fit needs at least as many rows as columns");
  const double positives = y.sum();
  if (positives < 1.0 || positives > static_cast<double>(n) - 1.0) {
    throw DataError("fit needs at least one row of each label");
  }

  std::vector<std::string> names;
  if (p_full == kColumnCount) {
    names = column_names();
  } else {
    for (Eigen::Index j = 0; j < p_full; ++j) names.push_back("x" + std::to_string(j));
  }

  FitDiagnostics diag;
  diag.ridge_lambda = options.ridge_lambda;
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p_full; ++j) {
    if (j > 0 && x_full.col(j).cwiseAbs().maxCoeff() == 0.0) {
      diag.inactive_columns.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      active.push_back(j);
    }
  }
  const Eigen::Index p = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index k = 0; k < p; ++k) x.col(k) = x_full.col(active[static_cast<std::size_t>(k)]);

  if (options.ridge_lambda <= 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
      std::vector<std::string> dependent;
      for (Eigen::Index k = qr.rank(); k < p; ++k) {
        dependent.push_back(names[static_cast<std::size_t>(active[static_cast<std::size_t>(qr.colsPermutation().indices()[k])])]);
      }
      std::sort(dependent.begin(), dependent.end());
      throw SingularDesignError(std::move(dependent));
    }
  }

  // Ridge acts on every active column except the intercept.
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, options.ridge_lambda);
  if (active.front() == 0) penalty[0] = 0.0;
  auto objective = [&](const Eigen::VectorXd& a) {
    return log_likelihood(x, y, a) - 0.5 * (penalty.array() * a.array().square()).sum();
  };

  Eigen::VectorXd a = Eigen::VectorXd::Zero(p);
  double obj = objective(a);
  diag.log_likelihood_trace.push_back(obj);
  bool converged = false;
  bool separated = false;
  Eigen::VectorXd prob(n);
  Eigen::VectorXd w(n);

  for (int it = 1; it <= options.max_iterations; ++it) {
    diag.iterations = it;
    const Eigen::VectorXd eta = x * a;
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = stats::logistic(eta[i]);
      w[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd grad = x.transpose() * (y - prob) - penalty.cwiseProduct(a);
    Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    info.diagonal() += penalty;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      separated = true;
      break;
    }
    const Eigen::VectorXd step = llt.solve(grad);

    double scale = 1.0;
    Eigen::VectorXd candidate = a + step;
    double cand_obj = objective(candidate);
    const double slack = 1e-12 * (1.0 + std::abs(obj));
    int halvings = 0;
    while (!(cand_obj >= obj - slack) && halvings < 60) {
      scale *= 0.5;
      ++halvings;
      candidate = a + scale * step;
      cand_obj = objective(candidate);
    }
    diag.step_halvings += halvings;
    if (!(cand_obj >= obj - slack)) break;  // no ascent direction left

    const double change = (candidate - a).cwiseAbs().maxCoeff();
    a = candidate;
    obj = cand_obj;
    diag.log_likelihood_trace.push_back(obj);
    if (!std::isfinite(a.cwiseAbs().maxCoeff())) {
      separated = true;
      break;
    }
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }

  const Eigen::VectorXd eta = x * a;
  for (Eigen::Index i = 0; i < n; ++i) {
    prob[i] = stats::logistic(eta[i]);
    w[i] = prob[i] * (1.0 - prob[i]);
  }
  if (!converged && !separated) {
    // Fitted probabilities pinned at 0 or 1 are the signature of separation.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (prob[i] < 1e-10 || prob[i] > 1.0 - 1e-10) {
        separated = true;
        break;
      }
    }
  }
  diag.status = converged ? "converged" : (separated ? "separation" : "max_iterations");

  Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
  info.diagonal() += penalty;
  Eigen::MatrixXd cov_active = Eigen::MatrixXd::Constant(p, p, kNaN);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() == Eigen::Success) cov_active = llt.solve(Eigen::MatrixXd::Identity(p, p));

  FittedModel m;
  m.columns = names;
  m.coefficients = Eigen::VectorXd::Zero(p_full);
  m.covariance = Eigen::MatrixXd::Constant(p_full, p_full, kNaN);
  for (Eigen::Index r = 0; r < p; ++r) {
    m.coefficients[active[static_cast<std::size_t>(r)]] = a[r];
    for (Eigen::Index c = 0; c < p; ++c) {
      m.covariance(active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(c)]) = cov_active(r, c);
    }
  }
  m.standard_errors = m.covariance.diagonal().array().sqrt();
  m.n_train = static_cast<std::size_t>(n);
  m.converged = converged;
  m.log_likelihood = log_likelihood(x, y, a);

  diag.fitted = prob;
  if (diagnostics) *diagnostics = std::move(diag);
  return m;
}

double predict_linear(const FittedModel& model, const Eigen::RowVectorXd& row) {
  if (row.size() != model.coefficients.size()) throw DataError("row width does not match model");
  return row.dot(model.coefficients);
}

double predict_probability(const FittedModel& model, const Eigen::RowVectorXd& row) {
  const double p = stats::logistic(predict_linear(model, row));
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double predict_risk(const FittedModel& model, const graph::SegmentFeatures& features) {
  if (!model.converged) throw UsageError("model for '" + model.city + "' did not converge");
  return predict_probability(model, design_row(features, model.scaling));
}

std::vector<WaldRow> wald_table(const FittedModel& model) {
  std::vector<WaldRow> rows;
  for (Eigen::Index j = 0; j < model.coefficients.size(); ++j) {
    WaldRow r;
    r.column = model.columns[static_cast<std::size_t>(j)];
    r.estimate = model.coefficients[j];
    r.se = model.standard_errors[j];
    r.z = r.estimate == 0.0 ? 0.0 : r.estimate / r.se;
    r.p = stats::two_sided_p(r.z);
    r.ci_low = r.estimate - stats::kZ95 * r.se;
    r.ci_high = r.estimate + stats::kZ95 * r.se;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

void require_same_layout(const FittedModel& a, const FittedModel& b) {
  if (a.columns != b.columns) throw DataError("models have different column layouts");
}

}  // namespace

std::vector<OverlapRow> ci_overlap(const FittedModel& a, const FittedModel& b) {
  require_same_layout(a, b);
  const auto wa = wald_table(a);
  const auto wb = wald_table(b);
  std::vector<OverlapRow> out;
  for (std::size_t j = 0; j < wa.size(); ++j) {
    out.push_back({wa[j].column, wa[j].ci_low <= wb[j].ci_high && wb[j].ci_low <= wa[j].ci_high});
  }
  return out;
}

std::vector<ComparisonRow> compare_models(const FittedModel& a, const FittedModel& b) {
  require_same_layout(a, b);
  std::vector<ComparisonRow> out;
  for (Eigen::Index j = 0; j < a.coefficients.size(); ++j) {
    ComparisonRow r;
    r.column = a.columns[static_cast<std::size_t>(j)];
    r.difference = a.coefficients[j] - b.coefficients[j];
    const double se1 = a.standard_errors[j];
    const double se2 = b.standard_errors[j];
    r.z = r.difference == 0.0 ? 0.0 : r.difference / std::sqrt(se1 * se1 + se2 * se2);
    r.p = stats::two_sided_p(r.z);
    r.significant = r.p < 0.05;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

double number_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json date_or_null(const std::optional<Date>& d) {
  return d ? json(ingest::format_iso_date(*d)) : json(nullptr);
}

}  // namespace

void write_model_json(std::ostream& out, const FittedModel& m) {
  nlohmann::ordered_json doc;
  doc["city"] = m.city;
  doc["columns"] = m.columns;
  auto vec = [](const Eigen::VectorXd& v) {
    auto arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number_or_null(v[i]));
    return arr;
  };
  doc["coefficients"] = vec(m.coefficients);
  doc["standard_errors"] = vec(m.standard_errors);
  auto cov = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.covariance.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.covariance.cols(); ++c) cov.push_back(number_or_null(m.covariance(r, c)));
  }
  doc["covariance"] = std::move(cov);
  nlohmann::ordered_json scaling = nlohmann::ordered_json::object();
  for (const auto& [name, s] : m.scaling.columns) scaling[name] = {{"mean", s.mean}, {"sd", s.sd}};
  doc["scaling"] = std::move(scaling);
  doc["train_window"] = {{"from", date_or_null(m.train_from)}, {"to", date_or_null(m.train_to)}};
  doc["n_train"] = m.n_train;
  doc["converged"] = m.converged;
  doc["log_likelihood"] = number_or_null(m.log_likelihood);
  out << doc.dump(2) << '\n';
}

FittedModel read_model_json(std::istream& in) {
  try {
    const json doc = json::parse(in);
    FittedModel m;
    m.city = doc.at("city").get<std::string>();
    m.columns = doc.at("columns").get<std::vector<std::string>>();
    const auto p = static_cast<Eigen::Index>(m.columns.size());
    auto vec = [&](const json& arr) {
      if (static_cast<Eigen::Index>(arr.size()) != p) throw DataError("model vector has wrong length");
      Eigen::VectorXd v(p);
      for (Eigen::Index i = 0; i < p; ++i) v[i] = number_from(arr.at(static_cast<std::size_t>(i)));
      return v;
    };
    m.coefficients = vec(doc.at("coefficients"));
    m.standard_errors = vec(doc.at("standard_errors"));
    const json& cov = doc.at("covariance");
    if (static_cast<Eigen::Index>(cov.size()) != p * p) throw DataError("covariance has wrong length");
    m.covariance.resize(p, p);
    for (Eigen::Index r = 0; r < p; ++r) {
      for (Eigen::Index c = 0; c < p; ++c) m.covariance(r, c) = number_from(cov.at(static_cast<std::size_t>(r * p + c)));
    }
    for (const auto& [name, s] : doc.at("scaling").items()) {
      m.scaling.columns[name] = {s.at("mean").get<double>(), s.at("sd").get<double>()};
    }
    const json& window = doc.at("train_window");
    if (!window.at("from").is_null()) m.train_from = ingest::parse_iso_date(window.at("from").get<std::string>());
    if (!window.at("to").is_null()) m.train_to = ingest::parse_iso_date(window.at("to").get<std::string>());
    m.n_train = doc.at("n_train").get<std::size_t>();
    m.converged = doc.at("converged").get<bool>();
    m.log_likelihood = number_from(doc.at("log_likelihood"));
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid model JSON: ") + e.what());
  }
}

FittedModel read_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  FittedModel m = read_model_json(in);
  return m;
}

// ---------------------------------------------------------------------------
// Design CSV

void write_design_csv(std::ostream& out, std::span<const LabeledRow> rows) {
  csv::Writer w(out);
  std::vector<std::string> header = {"record_id", "date"};
  for (auto name : kColumnNames) header.emplace_back(name);
  header.emplace_back("y");
  w.row(header);
  ScalingMetadata identity;
  for (Column c : kContinuousColumns) identity.columns[std::string(kColumnNames[c])] = {};
  for (const auto& r : rows) {
    const Eigen::RowVectorXd x = design_row(r.features, identity);
    std::vector<std::string> fields = {r.id, r.date ? ingest::format_iso_date(*r.date) : ""};
    for (Eigen::Index j = 0; j < x.size(); ++j) fields.push_back(csv::format_double(x[j]));
    fields.push_back(std::to_string(r.label));
    w.row(fields);
  }
}

void write_design_matrix_csv(std::ostream& out, const DesignMatrix& design) {
  csv::Writer w(out);
  std::vector<std::string> header;
  for (auto name : kColumnNames) header.emplace_back(name);
  header.emplace_back("y");
  w.row(header);
  for (Eigen::Index i = 0; i < design.x.rows(); ++i) {
    std::vector<std::string> fields;
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) fields.push_back(csv::format_double(design.x(i, j)));
    fields.push_back(std::to_string(static_cast<int>(design.y[i])));
    w.row(fields);
  }
}

std::vector<LabeledRow> read_design_csv(std::istream& in) {
  std::size_t line_no = 0;
  auto header_line = csv::next_line(in, line_no);
  if (!header_line) throw DataError("design CSV is empty");
  const auto header = csv::split_record(*header_line);
  auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (csv::trim(header[i]) == name) return i;
    }
    return std::nullopt;
  };
  auto require = [&](std::string_view name) {
    auto i = find(name);
    if (!i) throw DataError("design CSV lacks column " + std::string(name));
    return *i;
  };
  const std::size_t speed = require("speed_limit");
  const std::size_t width = require("width");
  const std::size_t betw = require("betweenness");
  const std::size_t dist = require("dist_intersect");
  const std::size_t hilly = require("hilly");
  const std::size_t curved = require("curved");
  const std::size_t bike = require("bikelane");
  const std::size_t label = require("y");
  const auto id_col = find("record_id");
  const auto date_col = find("date");

  std::vector<LabeledRow> rows;
  while (auto line = csv::next_line(in, line_no)) {
    const auto f = csv::split_record(*line);
    if (f.size() != header.size()) {
      throw DataError("design CSV line " + std::to_string(line_no) + ": wrong field count");
    }
    auto num = [&](std::size_t i) {
      double v = 0.0;
      const std::string t = csv::trim(f[i]);
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc{} || ptr != t.data() + t.size()) {
        throw DataError("design CSV line " + std::to_string(line_no) + ": bad number '" + t + "'");
      }
      return v;
    };
    LabeledRow r;
    if (id_col) r.id = f[*id_col];
    if (date_col && !csv::trim(f[*date_col]).empty()) {
      r.date = ingest::parse_iso_date(f[*date_col]);
      if (!r.date) throw DataError("design CSV line " + std::to_string(line_no) + ": bad date");
    }
    r.features.speed_limit_kmh = num(speed);
    r.features.width_m = num(width);
    r.features.betweenness = num(betw);
    r.features.dist_intersect_m = num(dist);
    r.features.hilliness = num(hilly) != 0.0 ? graph::Hilliness::Hilly : graph::Hilliness::Flat;
    r.features.topology = num(curved) != 0.0 ? graph::Topology::Curved : graph::Topology::Straight;
    r.features.bikelane = num(bike) != 0.0;
    const double y = num(label);
    if (y != 0.0 && y != 1.0) throw DataError("design CSV line " + std::to_string(line_no) + ": y must be 0 or 1");
    r.label = static_cast<int>(y);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<LabeledRow> read_design_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open design file " + path.string());
  return read_design_csv(in);
}

}  // namespace bikerisk::model
