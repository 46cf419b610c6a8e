#pragma once

#include <functional>
#include <span>
#include <vector>

namespace srtree {

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // unbiased
// q in [0,1]; linear interpolation between order statistics
double quantile(std::vector<double> x, double q);
double median(std::vector<double> x);

struct LineFit {
  double slope = 0.0, intercept = 0.0;
  double slope_stderr = 0.0;
  int points = 0;
};
// ordinary least squares y = a + b x
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Kolmogorov survival function P(K > lambda).
double kolmogorov_sf(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

}  // namespace srtree
