#pragma once

// Linear-Gaussian fallbacks: third-cumulant Gaussianity check, partial
// correlation with one conditioning variable, and the Fisher-z CI decision.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "fedishc/cumulants.hpp"
#include "fedishc/discovery.hpp"
#include "fedishc/error.hpp"
#include "fedishc/federation.hpp"

namespace fedishc {

struct GaussianReport {
  std::vector<std::uint8_t> flags;  // per variable: C3 indistinguishable from 0
  std::vector<double> c3;
  std::vector<double> threshold;
  bool all_gaussian = false;

  std::size_t flagged_count() const {
    std::size_t n = 0;
    for (auto f : flags) n += f != 0;
    return n;
  }
};

// A variable is flagged when |C3| < z * se. se is the bootstrap standard
// deviation of C3 when there are at least two replicates; otherwise
// sqrt(6 / total_n) * sigma^3, the standard error of a Gaussian's third
// cumulant.
inline GaussianReport detect_gaussian(const GlobalCumulantTable& g, std::uint64_t total_n, double z = 6.0) {
  if (total_n < 2) throw InvalidArgument("detect_gaussian: total_n < 2");
  const std::size_t d = g.d();
  GaussianReport r;
  r.flags.resize(d);
  r.c3.resize(d);
  r.threshold.resize(d);
  r.all_gaussian = d > 0;
  for (std::size_t i = 0; i < d; ++i) {
    double se;
    if (g.replicates.size() >= 2) {
      std::vector<double> c3(g.replicates.size());
      for (std::size_t b = 0; b < c3.size(); ++b) c3[b] = g.replicates[b].c3(i);
      se = detail::sample_sd(c3);
    } else {
      const double var = g.covariance.rows() == d ? g.covariance(i, i) : 0.0;
      se = std::sqrt(6.0 / static_cast<double>(total_n)) * std::pow(std::max(var, 0.0), 1.5);
    }
    r.c3[i] = g.base.c3(i);
    r.threshold[i] = z * se;
    r.flags[i] = std::abs(r.c3[i]) < r.threshold[i] || r.c3[i] == 0.0;
    r.all_gaussian = r.all_gaussian && r.flags[i];
  }
  return r;
}

inline RealGrid federated_correlation(const GlobalCumulantTable& g) {
  return correlation_from_covariance(g.covariance, g.variable_ids());
}

// rho_{xy|z} = (rho_xy - rho_xz rho_zy) / sqrt((1 - rho_xz^2)(1 - rho_zy^2))
inline double partial_correlation(const RealGrid& corr, std::size_t x, std::size_t y, std::size_t z) {
  const double rxy = corr(x, y);
  const double rxz = corr(x, z);
  const double rzy = corr(z, y);
  const double a = 1.0 - rxz * rxz;
  const double b = 1.0 - rzy * rzy;
  if (a <= 1e-12 || b <= 1e-12) throw DegenerateConditioning("partial_correlation: conditioning variable is collinear");
  return (rxy - rxz * rzy) / std::sqrt(a * b);
}

// Fisher-z test with one conditioning variable: |atanh(r)| sqrt(n - 4)
// against the two-sided standard-normal quantile. True means independent.
inline bool ci_decision(double pcorr, std::uint64_t n, double alpha) {
  if (n < 4) throw InvalidArgument("ci_decision: n < 4");
  if (!(std::abs(pcorr) < 1.0)) throw InvalidArgument("ci_decision: |pcorr| >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("ci_decision: alpha outside (0, 1)");
  const double stat = std::abs(std::atanh(pcorr)) * std::sqrt(static_cast<double>(n - 4));
  const boost::math::normal standard;
  return stat < boost::math::quantile(standard, 1.0 - alpha / 2.0);
}

}  // namespace fedishc
