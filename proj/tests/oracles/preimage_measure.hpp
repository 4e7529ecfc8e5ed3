#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace oracle {

using Interval = std::pair<double, double>;

/// Lebesgue transition matrix of x -> a x + b mod 1 (integer a >= 1) on
/// interval cells: P(i, j) = |U_j cap f^{-1}(U_i)| / |U_j|.
inline Eigen::MatrixXd preimage_measure_matrix(int a, double b, const std::vector<Interval>& cells) {
  const auto m = static_cast<Eigen::Index>(cells.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto [lo, hi] = cells[static_cast<std::size_t>(j)];
    // Breakpoints where a x + b crosses an integer.
    std::vector<double> cuts{lo, hi};
    for (double n = std::ceil(a * lo + b); n < a * hi + b; n += 1.0) {
      const double x = (n - b) / a;
      if (x > lo && x < hi) cuts.push_back(x);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
      const double shift = std::floor(a * mid + b);
      const double y0 = a * cuts[c] + b - shift;
      const double y1 = a * cuts[c + 1] + b - shift;
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto [ilo, ihi] = cells[static_cast<std::size_t>(i)];
        const double overlap = std::max(0.0, std::min(y1, ihi) - std::max(y0, ilo));
        p(i, j) += overlap / a;
      }
    }
    p.col(j) /= (hi - lo);
  }
  return p;
}

inline std::vector<Interval> uniform_cells(std::size_t m) {
  std::vector<Interval> cells;
  for (std::size_t k = 0; k < m; ++k)
    cells.emplace_back(static_cast<double>(k) / static_cast<double>(m),
                       static_cast<double>(k + 1) / static_cast<double>(m));
  return cells;
}

}  // namespace oracle
