#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skewflow/random.hpp"

namespace skewflow {

/// Point of the suspension space: tape position and height in [0, H).
struct DriverState {
  std::uint64_t index = 0;
  double fiber = 0.0;

  friend bool operator==(const DriverState&, const DriverState&) = default;
};

/// Suspension flow with constant ceiling H over the full shift on 2^L block
/// symbols. The tape is a pure function of (seed, index), so any position is
/// addressable in O(1) and replay is exact.
class SuspensionDriver {
 public:
  SuspensionDriver(unsigned block_bits, double ceiling, std::uint64_t seed);

  unsigned block_bits() const { return block_bits_; }
  std::uint64_t alphabet_size() const { return std::uint64_t{1} << block_bits_; }
  double ceiling() const { return ceiling_; }
  std::uint64_t seed() const { return seed_; }

  /// Fair block symbol written at tape position `index`.
  std::uint64_t symbol(std::uint64_t index) const {
    return mix64(seed_ ^ mix64(index)) & (alphabet_size() - 1);
  }
  std::uint64_t symbol(const DriverState& state) const { return symbol(state.index); }

  /// Gamma^dt. Throws PreconditionError for negative dt.
  DriverState advance(const DriverState& state, double dt) const;

  /// Draw from the invariant measure: uniform tape position, uniform height.
  DriverState random_state(Stream& rng) const;

 private:
  unsigned block_bits_;
  double ceiling_;
  std::uint64_t seed_;
};

inline DriverState suspension_advance(const SuspensionDriver& driver, const DriverState& state,
                                      double dt) {
  return driver.advance(state, dt);
}

/// Assignment of block symbols to k sector groups with dyadic masses
/// approximating a target probability vector.
struct SectorReadout {
  std::size_t branches = 1;
  unsigned block_bits = 0;
  std::vector<std::uint64_t> group_end;  // exclusive end of each group's block range
  std::vector<std::size_t> group_sizes;  // preimage counts
  Eigen::VectorXd target;

  double angle(std::size_t group) const;
  std::size_t group(std::uint64_t symbol) const {
    return static_cast<std::size_t>(
        std::upper_bound(group_end.begin(), group_end.end(), symbol) - group_end.begin());
  }
  /// Exact driver mass of a group: preimage count / 2^L.
  double group_mass(std::size_t group) const;
  /// max_i |group_mass(i) - target_i|.
  double quota_error() const;
};

/// Largest-remainder dyadic quotas, blocks assigned to groups in
/// lexicographic order. Throws PreconditionError if beta is not a probability
/// vector (1e-12) or has more than 2^L entries.
SectorReadout assign_groups(const Eigen::VectorXd& beta, unsigned block_bits);

/// Sector-center angle of the current block symbol.
double zeta_readout(const SuspensionDriver& driver, const DriverState& state,
                    const SectorReadout& readout);

/// Nonnegative weight on [0, 1] with unit integral, given with its
/// antiderivative so window sums are exact.
struct UnitWeight {
  std::string name;
  std::function<double(double)> density;
  std::function<double(double)> cumulative;
};

/// w(s) = 6 s (1 - s).
UnitWeight bump_weight();
/// w(s) = 1.
UnitWeight uniform_weight();

/// Normalized window average (1/T) int_0^T w(t/T) exp(i zeta(Gamma^t start)) dt,
/// evaluated segment by segment between ceiling crossings.
struct WindowAverage {
  std::complex<double> value;
  std::size_t crossings = 0;
};

WindowAverage zeta_bar(const SuspensionDriver& driver, const SectorReadout& readout,
                       const DriverState& start, double horizon, const UnitWeight& weight);

/// The same average truncated at fraction `upto` of the window:
/// (1/T) int_0^{upto T} w(t/T) exp(i zeta(Gamma^t start)) dt.
WindowAverage zeta_bar_partial(const SuspensionDriver& driver, const SectorReadout& readout,
                               const DriverState& start, double horizon, const UnitWeight& weight,
                               double upto);

/// Set of block symbols, read at one driver time.
struct BlockEvent {
  std::function<bool(std::uint64_t)> contains;
};

/// Exact driver measure of a block event (enumerates the alphabet).
double event_mass(const SuspensionDriver& driver, const BlockEvent& event);

/// Monte Carlo estimate of nu{ Gamma^{t_i} x in E_i for all i }.
struct JointEventEstimate {
  double joint = 0.0;
  double product = 0.0;  // product of exact event masses
  std::size_t samples = 0;
  /// Binomial standard error of the joint estimate at the product value.
  double sigma() const;
};

JointEventEstimate joint_event_estimate(const SuspensionDriver& driver,
                                        const std::vector<BlockEvent>& events,
                                        const std::vector<double>& times, std::size_t samples,
                                        std::uint64_t seed);

/// nu(x in A and Gamma^lag x in B), compared with nu(A) nu(B). Throws
/// PreconditionError if either event has zero mass.
JointEventEstimate correlation_estimate(const SuspensionDriver& driver, const BlockEvent& a,
                                        const BlockEvent& b, double lag, std::size_t samples,
                                        std::uint64_t seed);

/// Group labels at times T, 2T, ..., NT against the product of group masses.
struct SeparatedEventsReport {
  double max_deviation = 0.0;
  std::vector<double> empirical;  // indexed by label word in base k, first label most significant
  std::vector<double> product;
  std::size_t trials = 0;
};

SeparatedEventsReport separated_events_test(const SuspensionDriver& driver,
                                            const SectorReadout& readout, double separation,
                                            std::size_t length, std::size_t trials,
                                            std::uint64_t seed);

}  // namespace skewflow
