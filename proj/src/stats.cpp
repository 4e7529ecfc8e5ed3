#include "skewflow/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

#include "skewflow/errors.hpp"

namespace skewflow {

double chi_squared_quantile(std::size_t dof, double level) {
  if (dof == 0) return 0.0;
  const boost::math::chi_squared_distribution<double> law(static_cast<double>(dof));
  return boost::math::quantile(law, level);
}

double binomial_sigma(double p, double n) {
  return n > 0.0 ? std::sqrt(p * (1.0 - p) / n) : 0.0;
}

IndependenceTest independence_test(const Eigen::MatrixXd& counts, double level) {
  if ((counts.array() < 0.0).any()) throw PreconditionError("negative count in contingency table");
  IndependenceTest test;
  test.level = level;
  test.samples = counts.sum();
  if (!(test.samples > 0.0)) throw PreconditionError("empty contingency table");
  const Eigen::VectorXd rows = counts.rowwise().sum();
  const Eigen::RowVectorXd cols = counts.colwise().sum();
  const double n = test.samples;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      const double expected = rows[i] * cols[j] / n;
      test.total_variation += 0.5 * std::abs(counts(i, j) - expected) / n;
      if (expected > 0.0) test.statistic += std::pow(counts(i, j) - expected, 2) / expected;
    }
  }
  const auto live_rows = static_cast<std::size_t>((rows.array() > 0.0).count());
  const auto live_cols = static_cast<std::size_t>((cols.array() > 0.0).count());
  test.dof = (live_rows > 0 && live_cols > 0) ? (live_rows - 1) * (live_cols - 1) : 0;
  test.quantile = chi_squared_quantile(test.dof, level);
  return test;
}

}  // namespace skewflow
