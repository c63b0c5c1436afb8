#include "doctest.h"

#include <algorithm>
#include <random>
#include <sstream>

#include "bikerisk/error.hpp"
#include "bikerisk/evaluation.hpp"

using namespace bikerisk;
using namespace bikerisk::eval;

TEST_CASE("brier score examples") {
  const std::vector<double> a{0.9}, b{0.55};
  const std::vector<int> one{1};
  CHECK(std::abs(brier_score(a, one) - 0.01) < 1e-15);
  CHECK(std::abs(brier_score(b, one) - 0.2025) < 1e-15);

  const std::vector<int> y{0, 1, 1, 0, 1};
  const std::vector<double> perfect{0, 1, 1, 0, 1}, half(5, 0.5);
  CHECK(brier_score(perfect, y) == 0.0);
  CHECK(brier_score(half, y) == 0.25);

  const std::vector<double> two{0.5, 0.5};
  CHECK_THROWS_AS(brier_score(two, one), DataError);
  CHECK_THROWS_AS(brier_score({}, {}), DataError);
}

TEST_CASE("brier score is invariant under joint permutation") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(500);
  std::vector<int> y(500);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(rng);
    y[i] = u(rng) < 0.3;
  }
  const double base = brier_score(p, y);
  std::vector<std::size_t> order(p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pp;
    std::vector<int> yy;
    for (auto i : order) {
      pp.push_back(p[i]);
      yy.push_back(y[i]);
    }
    CHECK(brier_score(pp, yy) == doctest::Approx(base).epsilon(1e-14));
  }
}

TEST_CASE("constant forecast decomposition") {
  for (double p : {0.0, 0.2, 0.5, 0.93}) {
    for (int positives : {0, 7, 20, 40}) {
      std::vector<int> y(40, 0);
      std::fill(y.begin(), y.begin() + positives, 1);
      const double q = positives / 40.0;
      std::vector<double> probs(40, p);
      CHECK(std::abs(brier_score(probs, y) - ((p - q) * (p - q) + q * (1 - q))) < 1e-12);
    }
  }
}

TEST_CASE("climatology reference") {
  const std::vector<int> balanced{0, 1, 0, 1};
  CHECK(climatology_brier(balanced, balanced) == 0.25);
  const std::vector<int> train{1, 0, 0, 0, 0};  // base rate 0.2
  const std::vector<int> ones(7, 1);
  CHECK(climatology_brier(train, ones) == doctest::Approx(0.64).epsilon(1e-15));
  const std::vector<int> same{0, 0, 1, 0, 0, 0, 0, 0, 0, 1};
  CHECK(climatology_brier(train, same) == doctest::Approx(0.2 * 0.8).epsilon(1e-14));
  CHECK_THROWS_AS(climatology_brier({}, ones), DataError);
}

TEST_CASE("skill score") {
  CHECK(brier_skill_score(0.119, 0.14).value() == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(std::abs(*brier_skill_score(0.142, 0.17) - 0.16) < 0.005);
  CHECK(brier_skill_score(0.2, 0.2) == 0.0);
  CHECK(brier_skill_score(0.0, 0.2) == 1.0);
  CHECK(*brier_skill_score(0.3, 0.2) < 0.0);
  CHECK_FALSE(brier_skill_score(0.1, 0.0).has_value());
}

TEST_CASE("reliability curve") {
  SUBCASE("a single calibrated bin") {
    std::vector<double> p(100, 0.75);
    std::vector<int> y(100, 0);
    std::fill(y.begin(), y.begin() + 75, 1);
    const auto c = reliability_curve(p, y);
    REQUIRE(c.bins.size() == 10);
    for (std::size_t b = 0; b < 10; ++b) {
      CHECK(c.bins[b].lo == doctest::Approx(b / 10.0));
      if (b == 7) {
        CHECK(c.bins[b].n == 100);
        CHECK(*c.bins[b].mean_predicted == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(*c.bins[b].observed_fraction == 0.75);
      } else {
        CHECK(c.bins[b].n == 0);
        CHECK_FALSE(c.bins[b].observed_fraction.has_value());
        CHECK_FALSE(c.bins[b].mean_predicted.has_value());
      }
    }
  }
  SUBCASE("edges of the partition") {
    const std::vector<double> p{0.0, 0.1, 0.0999, 0.9, 1.0};
    const std::vector<int> y{0, 0, 1, 1, 1};
    const auto c = reliability_curve(p, y);
    CHECK(c.bins[0].n == 2);
    CHECK(c.bins[1].n == 1);
    CHECK(c.bins[9].n == 2);
  }
  SUBCASE("sums over bins match the inputs") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(2000);
    std::vector<int> y(2000);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng) * u(rng);
      y[i] = u(rng) < p[i];
    }
    const auto c = reliability_curve(p, y);
    double sp = 0, sy = 0, np = 0, ny = 0;
    std::size_t n = 0;
    for (double v : p) sp += v;
    for (int v : y) sy += v;
    for (const auto& b : c.bins) {
      n += b.n;
      if (b.n) {
        np += b.n * *b.mean_predicted;
        ny += b.n * *b.observed_fraction;
      }
    }
    CHECK(n == p.size());
    CHECK(np == doctest::Approx(sp).epsilon(1e-12));
    CHECK(ny == doctest::Approx(sy).epsilon(1e-12));
    std::size_t h = 0;
    for (auto v : c.histogram) h += v;
    CHECK(h == p.size());
  }
  SUBCASE("all low probabilities populate only the first bin") {
    std::vector<double> p{0.01, 0.05, 0.09};
    std::vector<int> y{0, 0, 1};
    const auto c = reliability_curve(p, y);
    CHECK(c.bins[0].n == 3);
    std::size_t populated = 0;
    for (const auto& b : c.bins) populated += b.n > 0;
    CHECK(populated == 1);
  }
}

namespace {

model::FittedModel intercept_model(double intercept) {
  model::FittedModel m;
  m.columns = {"intercept"};
  m.coefficients = Eigen::VectorXd::Constant(1, intercept);
  m.standard_errors = Eigen::VectorXd::Constant(1, 0.1);
  m.covariance = Eigen::MatrixXd::Constant(1, 1, 0.01);
  m.converged = true;
  return m;
}

}  // namespace

TEST_CASE("evaluate a constant base-rate model") {
  std::vector<int> train(100, 0), test(50, 0);
  std::fill(train.begin(), train.begin() + 30, 1);
  std::fill(test.begin(), test.begin() + 15, 1);
  model::DesignMatrix d;
  d.x = Eigen::MatrixXd::Ones(50, 1);
  d.y.resize(50);
  for (int i = 0; i < 50; ++i) d.y[i] = test[i];
  const auto m = intercept_model(std::log(0.3 / 0.7));
  const auto r = evaluate(m, d, train, "t");
  CHECK(r.n_test == 50);
  CHECK(r.accuracy == doctest::Approx(0.7));
  CHECK(std::abs(*r.bss) < 1e-12);
  CHECK(*r.bss == doctest::Approx(1.0 - r.brier / r.brier_ref).epsilon(1e-12));

  model::DesignMatrix wrong;
  wrong.x = Eigen::MatrixXd::Ones(5, 2);
  wrong.y = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(evaluate(m, wrong, train), DataError);
}

TEST_CASE("evaluate a perfect model") {
  model::FittedModel m;
  m.columns = {"intercept", "x"};
  m.coefficients = Eigen::Vector2d(0.0, 1000.0);
  m.standard_errors = Eigen::Vector2d(1, 1);
  m.covariance = Eigen::Matrix2d::Identity();
  m.converged = true;
  model::DesignMatrix d;
  d.x.resize(4, 2);
  d.x << 1, -1, 1, 1, 1, -1, 1, 1;
  d.y = Eigen::Vector4d(0, 1, 0, 1);
  const std::vector<int> train{0, 1};
  const auto r = evaluate(m, d, train);
  CHECK(r.accuracy == 1.0);
  // saturated logistic: zero up to double rounding
  CHECK(r.brier < 1e-30);
  CHECK(*r.bss == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("report exports") {
  EvaluationReport r;
  r.train_city = "london";
  r.test_city = "boston";
  r.accuracy = 0.75;
  r.brier = 0.142;
  r.brier_ref = 0.17;
  r.bss = brier_skill_score(r.brier, r.brier_ref);
  const std::vector<double> p{0.2, 0.8};
  const std::vector<int> y{0, 1};
  r.reliability = reliability_curve(p, y);
  std::ostringstream csv;
  write_report_csv(csv, std::vector<EvaluationReport>{r});
  CHECK(csv.str().rfind("training_city,testing_city,accuracy,bs,bs_baseline,bss\n", 0) == 0);
  CHECK(csv.str().find("london,boston,0.75,0.142,0.17,") != std::string::npos);

  std::ostringstream rel;
  write_reliability_csv(rel, r.reliability);
  CHECK(rel.str().rfind("bin_lo,bin_hi,n,mean_pred,observed_frac\n", 0) == 0);

  std::ostringstream svg;
  write_reliability_svg(svg, r.reliability, "london");
  CHECK(svg.str().find("<svg") != std::string::npos);
  CHECK(svg.str().find("</svg>") != std::string::npos);

  std::ostringstream json;
  write_report_json(json, r);
  CHECK(json.str().find("\"bss\"") != std::string::npos);
}
