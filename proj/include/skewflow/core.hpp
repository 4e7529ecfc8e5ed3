#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "skewflow/random.hpp"

namespace skewflow {

using Point = Eigen::VectorXd;

/// Axis-aligned box [lower, upper] in R^d.
template <typename Scalar>
struct AxisBox {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector lower;
  Vector upper;

  Eigen::Index dimension() const { return lower.size(); }
  Vector side() const { return upper - lower; }

  /// Membership in the closed box, widened by `slack` on every face.
  bool contains(const Vector& p, Scalar slack = Scalar(0)) const {
    return p.size() == lower.size() && ((p.array() >= lower.array() - slack).all()) &&
           ((p.array() <= upper.array() + slack).all());
  }

  /// Membership in the half-open box [lower, upper).
  bool contains_half_open(const Vector& p) const {
    return p.size() == lower.size() && ((p.array() >= lower.array()).all()) &&
           ((p.array() < upper.array()).all());
  }

  /// Nearest point of the closed box (coordinatewise clamp).
  Vector clamp(const Vector& p) const { return p.cwiseMax(lower).cwiseMin(upper); }
};

using Box = AxisBox<double>;

/// Chebyshev (sup-norm) distance; cell meshes are measured in the same norm.
template <typename DerivedA, typename DerivedB>
double sup_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).template lpNorm<Eigen::Infinity>();
}

/// Finite orbit segment. Column n of `points` is the n-th state.
struct Trajectory {
  Eigen::MatrixXd points;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  std::size_t dimension() const { return static_cast<std::size_t>(points.rows()); }
  Point origin() const { return points.col(0); }
  Point at(std::size_t n) const { return points.col(static_cast<Eigen::Index>(n)); }
};

/// A continuous self-map of R^d together with a box containing its attractor.
struct MapSystem {
  std::string name;
  std::size_t dimension = 1;
  std::function<Point(const Point&)> map;
  Box domain;
  std::map<std::string, double> parameters;

  /// Start point for attractor sampling, drawn from the given stream.
  std::function<Point(Stream&)> start;
  /// Transient discarded before attractor samples are recorded.
  std::size_t burn_in = 0;
  /// Replaces plain iteration when binary64 orbits degenerate (doubling map).
  std::function<Trajectory(std::size_t steps, std::uint64_t seed)> orbit_sampler;

  Point operator()(const Point& x) const { return map(x); }
};

/// x -> 2x mod 1 on [0, 1].
MapSystem doubling_map();
/// x -> x + alpha mod 1 on [0, 1].
MapSystem rotation_map(double alpha);
/// x -> a x (1 - x) on [0, 1].
MapSystem logistic_map(double a = 4.0);
/// (x, y) -> (1 - a x^2 + y, b x) with domain [-1.8, 1.8] x [-0.5, 0.5].
MapSystem henon_map(double a = 1.4, double b = 0.3);
/// Identity on [0, 1]^d.
MapSystem identity_map(std::size_t dimension = 1);

/// Builds a built-in system from its name and parameter table.
MapSystem make_system(const std::string& name, const std::map<std::string, double>& parameters);

/// Orbit x0, f(x0), ..., f^n(x0). Throws DomainError if x0 is outside the
/// system's domain box.
Trajectory iterate_map(const MapSystem& system, const Point& x0, std::size_t steps);

/// Orbit segment of `steps` transitions sampled on the attractor: either the
/// system's orbit sampler, or plain iteration from a seeded start after burn-in.
Trajectory attractor_orbit(const MapSystem& system, std::size_t steps, std::uint64_t seed);

/// Doubling-map orbit read from a fair-bit tape: x_n is the 53-bit window of
/// the binary expansion starting at bit n.
Trajectory doubling_tape_orbit(std::size_t steps, std::uint64_t seed);

/// Position and remaining exit time of the uniform interval flow on [0, L].
struct IntervalFlowResult {
  double coordinate;
  double remaining;
};

/// Flows l by s along [0, L] at unit speed. Throws ExitTimeExceeded when
/// s > L - l and DomainError when l is outside [0, L] or s < 0.
IntervalFlowResult uniform_interval_flow(double l, double s, double length);

/// Partial semi-flow: exit time T and flow map Phi(x, s) for s <= T(x).
template <typename State>
struct PartialSemiFlow {
  std::function<double(const State&)> exit_time;
  std::function<State(const State&, double)> flow;
  std::string tag;
};

/// Partial semi-flow carried along an axis by a projection onto [0, L].
template <typename State>
struct AxialFlow {
  PartialSemiFlow<State> partial;
  std::function<double(const State&)> projection;
  double length = 1.0;
};

/// Per-axiom maximum violation over the supplied samples.
struct AxialFlowReport {
  double exit_lands_on_face = 0.0;     // T(Phi(x, T(x))) = 0
  double exit_time_decrements = 0.0;   // T(Phi(x, s)) = T(x) - s
  double exit_time_is_axial = 0.0;     // T(x) = L - pi(x)
  double projection_advances = 0.0;    // pi(Phi(x, s)) = pi(x) + s
  double tolerance = 1e-9;
  std::size_t samples = 0;

  double worst() const {
    return std::max({exit_lands_on_face, exit_time_decrements, exit_time_is_axial,
                     projection_advances});
  }
  bool passed() const { return worst() <= tolerance; }
};

/// Checks the partial- and axial-flow axioms on (state, duration) samples.
/// Violations are reported, never thrown.
template <typename State>
AxialFlowReport validate_axial_flow(const AxialFlow<State>& axial,
                                    const std::vector<std::pair<State, double>>& samples,
                                    double tolerance = 1e-9) {
  AxialFlowReport report;
  report.tolerance = tolerance;
  report.samples = samples.size();
  const auto& exit_time = axial.partial.exit_time;
  const auto& flow = axial.partial.flow;
  for (const auto& [x, s] : samples) {
    const double tx = exit_time(x);
    const double px = axial.projection(x);
    const State at_exit = flow(x, tx);
    report.exit_lands_on_face = std::max(report.exit_lands_on_face, std::abs(exit_time(at_exit)));

    const State moved = flow(x, s);
    report.exit_time_decrements =
        std::max(report.exit_time_decrements, std::abs(exit_time(moved) - (tx - s)));
    report.exit_time_is_axial =
        std::max(report.exit_time_is_axial, std::abs(tx - (axial.length - px)));
    report.projection_advances =
        std::max(report.projection_advances, std::abs(axial.projection(moved) - (px + s)));
  }
  return report;
}

/// The uniform interval flow on [0, L] as an axial flow over its coordinate.
/// Flowing past the exit face stops on it.
AxialFlow<double> uniform_interval_axial_flow(double length);

}  // namespace skewflow
