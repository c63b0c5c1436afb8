#pragma once

#include <cmath>
#include <numbers>

namespace bikerisk::stats {

// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959964;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double two_sided_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

inline double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
inline double softplus(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace bikerisk::stats
