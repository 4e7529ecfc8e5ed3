#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace skewflow {

/// Pearson chi-squared test of independence on a contingency table of counts.
struct IndependenceTest {
  double statistic = 0.0;
  std::size_t dof = 0;
  double quantile = 0.0;       // null quantile at `level`
  double level = 0.99;
  double total_variation = 0.0;  // between the joint and the product of marginals
  double samples = 0.0;

  bool passed() const { return dof == 0 || statistic < quantile; }
};

/// Rows and columns with zero marginal are dropped from the degrees of freedom.
IndependenceTest independence_test(const Eigen::MatrixXd& counts, double level = 0.99);

/// Upper `level` quantile of the chi-squared law with `dof` degrees of freedom.
double chi_squared_quantile(std::size_t dof, double level);

/// Binomial standard error sqrt(p (1 - p) / n).
double binomial_sigma(double p, double n);

}  // namespace skewflow
