#pragma once

#include <vector>

namespace uavris::harness {

struct Summary {
  int n = 0;
  double mean = 0.0;
  double stddev = 0.0;      ///< sample standard deviation (n - 1)
  double ci95_half = 0.0;   ///< t_{0.975, n-1} * s / sqrt(n); 0 when n < 2
};

double mean(const std::vector<double>& x);

/// Mean and two-sided 95% Student-t confidence half-width of the sample mean.
Summary summarize(const std::vector<double>& x);

/// Two-sided 95% quantile of Student's t with `dof` degrees of freedom.
double t_quantile_975(int dof);

/// Least-squares slope of y on x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> x);

}  // namespace uavris::harness
