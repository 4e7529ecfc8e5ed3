#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "preimage_measure.hpp"

namespace oracle {

/// Exact law of the chain y' = clamp_{U_i}(f(y)), i ~ P(., cell), against the
/// true orbit x' = f(x), for f(x) = a x + b mod 1 on interval cells. Every
/// quantity is affine in the start point x_0 on a piece, so the set of starts
/// that survive N steps is a finite union of intervals with weights.
class IntervalChainOracle {
 public:
  enum class Mode { shadow, clamp_free };

  IntervalChainOracle(int a, double b, std::vector<Interval> cells, Eigen::MatrixXd transition)
      : a_(a), b_(b), cells_(std::move(cells)), p_(std::move(transition)) {}

  struct Affine {
    double slope = 1.0;
    double offset = 0.0;
    double at(double x) const { return slope * x + offset; }
  };

  struct Piece {
    double lo, hi;
    Affine y, x;
    std::size_t cell;
    double weight;
  };

  /// Surviving pieces after `steps` steps. In shadow mode a piece survives
  /// while |y_n - x_n| < tolerance; in clamp-free mode while no clamp occurs.
  std::vector<Piece> run(std::size_t steps, Mode mode, double tolerance) const {
    std::vector<Piece> live;
    for (std::size_t c = 0; c < cells_.size(); ++c)
      live.push_back({cells_[c].first, cells_[c].second, {1.0, 0.0}, {1.0, 0.0}, c, 1.0});
    for (std::size_t n = 0; n < steps; ++n) {
      std::vector<Piece> next;
      for (const Piece& piece : live) advance(piece, mode, tolerance, next);
      live.swap(next);
    }
    return live;
  }

  /// Mean over the given start points of the surviving weight.
  static double average(const std::vector<Piece>& pieces, std::vector<double> starts) {
    std::sort(starts.begin(), starts.end());
    double total = 0.0;
    for (const Piece& p : pieces) {
      const auto first = std::lower_bound(starts.begin(), starts.end(), p.lo);
      const auto last = std::lower_bound(starts.begin(), starts.end(), p.hi);
      total += p.weight * static_cast<double>(last - first);
    }
    return total / static_cast<double>(starts.size());
  }

 private:
  // Splits [lo, hi) where g = A x0 + B crosses an integer; returns pieces with
  // g reduced mod 1.
  struct Segment {
    double lo, hi;
    Affine g;
  };
  std::vector<Segment> reduce(double lo, double hi, Affine g) const {
    std::vector<double> cuts{lo, hi};
    if (g.slope != 0.0) {
      const double v0 = g.at(lo);
      const double v1 = g.at(hi);
      for (double k = std::ceil(std::min(v0, v1)); k < std::max(v0, v1); k += 1.0) {
        const double x = (k - g.offset) / g.slope;
        if (x > lo && x < hi) cuts.push_back(x);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<Segment> out;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      if (!(cuts[c + 1] > cuts[c])) continue;
      const double shift = std::floor(g.at(0.5 * (cuts[c] + cuts[c + 1])));
      out.push_back({cuts[c], cuts[c + 1], {g.slope, g.offset - shift}});
    }
    return out;
  }

  Affine map(Affine v) const { return {a_ * v.slope, a_ * v.offset + b_}; }

  void advance(const Piece& piece, Mode mode, double tolerance, std::vector<Piece>& out) const {
    for (const Segment& ys : reduce(piece.lo, piece.hi, map(piece.y))) {
      for (const Segment& xs : reduce(ys.lo, ys.hi, map(piece.x))) {
        for (std::size_t i = 0; i < cells_.size(); ++i) {
          const double mass = p_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(piece.cell));
          if (!(mass > 0.0)) continue;
          for (const auto& [lo, hi, y] : clamp_regions(xs.lo, xs.hi, ys.g, cells_[i], mode)) {
            double keep_lo = lo;
            double keep_hi = hi;
            if (mode == Mode::shadow && !within(lo, hi, y, xs.g, tolerance, keep_lo, keep_hi)) continue;
            if (!(keep_hi > keep_lo)) continue;
            out.push_back({keep_lo, keep_hi, y, xs.g, i, piece.weight * mass});
          }
        }
      }
    }
  }

  // Regions of [lo, hi) where h falls below, inside, or above the closed cell.
  std::vector<Segment> clamp_regions(double lo, double hi, Affine h, Interval cell, Mode mode) const {
    const auto [l, u] = cell;
    std::vector<double> cuts{lo, hi};
    if (h.slope != 0.0) {
      for (double level : {l, u}) {
        const double x = (level - h.offset) / h.slope;
        if (x > lo && x < hi) cuts.push_back(x);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<Segment> out;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      if (!(cuts[c + 1] > cuts[c])) continue;
      const double v = h.at(0.5 * (cuts[c] + cuts[c + 1]));
      if (v < l) {
        if (mode == Mode::shadow) out.push_back({cuts[c], cuts[c + 1], {0.0, l}});
      } else if (v > u) {
        if (mode == Mode::shadow) out.push_back({cuts[c], cuts[c + 1], {0.0, u}});
      } else {
        out.push_back({cuts[c], cuts[c + 1], h});
      }
    }
    return out;
  }

  // Subinterval of [lo, hi) where |y - x| < tolerance.
  static bool within(double lo, double hi, Affine y, Affine x, double tolerance, double& keep_lo,
                     double& keep_hi) {
    const Affine d{y.slope - x.slope, y.offset - x.offset};
    keep_lo = lo;
    keep_hi = hi;
    if (d.slope == 0.0) return std::abs(d.offset) < tolerance;
    double r0 = (-tolerance - d.offset) / d.slope;
    double r1 = (tolerance - d.offset) / d.slope;
    if (r0 > r1) std::swap(r0, r1);
    keep_lo = std::max(lo, r0);
    keep_hi = std::min(hi, r1);
    return keep_hi > keep_lo;
  }

  int a_;
  double b_;
  std::vector<Interval> cells_;
  Eigen::MatrixXd p_;
};

}  // namespace oracle
