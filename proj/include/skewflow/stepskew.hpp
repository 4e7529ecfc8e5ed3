#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

#include "skewflow/core.hpp"
#include "skewflow/partition.hpp"
#include "skewflow/random.hpp"
#include "skewflow/sample_path.hpp"

namespace skewflow {

/// Current cell and fiber point of the step-skew chain; y stays in the
/// closed cell of `cell`.
struct StepSkewState {
  std::size_t cell = 0;
  Point y;
};

/// Step-skew Markov product driven by a column-stochastic transition matrix.
/// Immutable once built; every sampling call owns its own stream.
class StepSkewProcess {
 public:
  /// `attractor` holds attractor samples as columns; they seed start states.
  StepSkewProcess(MapSystem system, BoxPartition partition, TransitionMatrix transition,
                  Eigen::MatrixXd attractor);

  const MapSystem& system() const { return system_; }
  const BoxPartition& partition() const { return partition_; }
  const TransitionMatrix& transition() const { return transition_; }
  const Eigen::MatrixXd& attractor() const { return attractor_; }
  std::size_t cell_of_sample(std::size_t n) const { return sample_cells_[n]; }

  /// Successor of cell j for a uniform draw u in [0, 1): inverse CDF over
  /// column j in increasing target order.
  std::size_t successor(std::size_t j, double u) const;

  /// Start state at a uniformly chosen attractor sample.
  StepSkewState random_start(Stream& rng) const;
  /// Start state at a uniformly chosen attractor sample inside cell j.
  StepSkewState random_start_in(std::size_t j, Stream& rng) const;

 private:
  MapSystem system_;
  BoxPartition partition_;
  TransitionMatrix transition_;
  Eigen::MatrixXd attractor_;
  std::vector<std::size_t> sample_cells_;
  std::vector<std::vector<std::size_t>> samples_by_cell_;
  std::vector<std::vector<std::pair<std::size_t, double>>> cumulative_;
};

struct StepOutcome {
  StepSkewState state;
  bool clamped = false;
};

/// One step using the uniform draw u.
StepOutcome step_skew_step(const StepSkewState& state, const StepSkewProcess& process, double u);

/// One step consuming a single uniform draw from rng.
inline StepOutcome step_skew_step(const StepSkewState& state, const StepSkewProcess& process,
                                  Stream& rng) {
  return step_skew_step(state, process, rng.uniform());
}

/// Atom of the one-step transition kernel.
struct KernelAtom {
  std::size_t cell;
  Point point;
  double mass;
};

/// Kernel from y in cell j: atoms phi_{j->i}(y) with mass P(i, j) > 0.
std::vector<KernelAtom> markov_kernel(const Point& y, std::size_t j, const StepSkewProcess& process);

/// N-step path from `start`; the path seed is recorded but not consumed here.
PathSample sample_step_skew_path(const StepSkewProcess& process, const StepSkewState& start,
                                 std::size_t steps, Stream& rng, std::uint64_t seed = 0);

/// Paths from random attractor starts; path t uses derive_seed(seed, t).
std::vector<PathSample> sample_step_skew_paths(const StepSkewProcess& process, std::size_t count,
                                               std::size_t steps, std::uint64_t seed,
                                               unsigned jobs = 1);

/// Empirical stationary law of the chain and its support diagnostics.
struct StationaryEstimate {
  Eigen::MatrixXd samples;       // post-burn y samples, one per column
  std::vector<std::size_t> cells;
  Eigen::VectorXd cell_marginal;
  double sample_to_cloud = 0.0;  // max distance from a sample to the attractor cloud
  double cloud_to_sample = 0.0;  // max distance from a cloud point to the samples
};

StationaryEstimate estimate_stationary(const StepSkewProcess& process, std::size_t burn,
                                       std::size_t count, std::uint64_t seed);

/// Directed Hausdorff distance sup_a inf_b |a - b| in the sup norm, between
/// point sets stored as columns.
double directed_hausdorff(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to);

struct MatchFraction {
  double fraction = 0.0;
  /// Mean over attractor starts of the product of true-transition masses.
  double oracle = 0.0;
  std::size_t trials = 0;
  std::size_t matches = 0;
};

/// Fraction of N-step chain paths that never clamp, hence are exact orbits.
MatchFraction exact_match_fraction(const StepSkewProcess& process, std::size_t steps,
                                   std::size_t trials, std::uint64_t seed, unsigned jobs = 1);

/// Mean over attractor samples of the probability that the chain follows the
/// true orbit for `steps` steps.
double clamp_free_probability(const StepSkewProcess& process, std::size_t steps);

}  // namespace skewflow
