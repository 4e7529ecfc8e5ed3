#include "skewflow/driver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "skewflow/errors.hpp"

namespace skewflow {

SuspensionDriver::SuspensionDriver(unsigned block_bits, double ceiling, std::uint64_t seed)
    : block_bits_(block_bits), ceiling_(ceiling), seed_(seed) {
  if (block_bits == 0 || block_bits > 32) throw PreconditionError("block length must be in [1, 32]");
  if (!(ceiling > 0.0) || !std::isfinite(ceiling)) throw PreconditionError("ceiling must be positive");
}

DriverState SuspensionDriver::advance(const DriverState& state, double dt) const {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw PreconditionError("driver time step must be >= 0");
  const double total = state.fiber + dt;
  const double crossings = std::floor(total / ceiling_);
  DriverState next{state.index + static_cast<std::uint64_t>(crossings),
                   total - crossings * ceiling_};
  if (next.fiber >= ceiling_) {
    next.fiber -= ceiling_;
    ++next.index;
  } else if (next.fiber < 0.0) {
    next.fiber = 0.0;
  }
  return next;
}

DriverState SuspensionDriver::random_state(Stream& rng) const {
  const std::uint64_t index = rng.next_u64();
  return {index, rng.uniform() * ceiling_};
}

double SectorReadout::angle(std::size_t group) const {
  return 2.0 * std::numbers::pi * static_cast<double>(group) / static_cast<double>(branches);
}

double SectorReadout::group_mass(std::size_t group) const {
  return static_cast<double>(group_sizes.at(group)) / std::ldexp(1.0, static_cast<int>(block_bits));
}

double SectorReadout::quota_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < branches; ++i)
    worst = std::max(worst, std::abs(group_mass(i) - target[static_cast<Eigen::Index>(i)]));
  return worst;
}

SectorReadout assign_groups(const Eigen::VectorXd& beta, unsigned block_bits) {
  if (block_bits == 0 || block_bits > 32) throw PreconditionError("readout block length must be in [1, 32]");
  const auto k = static_cast<std::size_t>(beta.size());
  const std::size_t blocks = std::size_t{1} << block_bits;
  if (k == 0) throw PreconditionError("empty target vector");
  if (k > blocks) throw PreconditionError("more groups than block symbols");
  if ((beta.array() < 0.0).any() || std::abs(beta.sum() - 1.0) > 1e-12)
    throw PreconditionError("target is not a probability vector");

  std::vector<std::size_t> quota(k);
  std::vector<double> remainder(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = beta[static_cast<Eigen::Index>(i)] * static_cast<double>(blocks);
    quota[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(quota[i]);
    assigned += quota[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < blocks; ++r, ++assigned) ++quota[order[r % k]];
  // Targets summing a hair above 1 can overshoot; trim the smallest remainders.
  for (std::size_t r = k; assigned > blocks && r > 0; --r) {
    if (quota[order[r - 1]] > 0) {
      --quota[order[r - 1]];
      --assigned;
    }
  }

  SectorReadout readout;
  readout.branches = k;
  readout.block_bits = block_bits;
  readout.target = beta;
  readout.group_sizes = quota;
  readout.group_end.resize(k);
  std::uint64_t end = 0;
  for (std::size_t i = 0; i < k; ++i) readout.group_end[i] = (end += quota[i]);
  return readout;
}

double zeta_readout(const SuspensionDriver& driver, const DriverState& state,
                    const SectorReadout& readout) {
  return readout.angle(readout.group(driver.symbol(state)));
}

UnitWeight bump_weight() {
  return {"bump", [](double s) { return (s < 0.0 || s > 1.0) ? 0.0 : 6.0 * s * (1.0 - s); },
          [](double s) {
            s = std::clamp(s, 0.0, 1.0);
            return s * s * (3.0 - 2.0 * s);
          }};
}

UnitWeight uniform_weight() {
  return {"uniform", [](double s) { return (s < 0.0 || s > 1.0) ? 0.0 : 1.0; },
          [](double s) { return std::clamp(s, 0.0, 1.0); }};
}

WindowAverage zeta_bar(const SuspensionDriver& driver, const SectorReadout& readout,
                       const DriverState& start, double horizon, const UnitWeight& weight) {
  return zeta_bar_partial(driver, readout, start, horizon, weight, 1.0);
}

WindowAverage zeta_bar_partial(const SuspensionDriver& driver, const SectorReadout& readout,
                               const DriverState& start, double horizon, const UnitWeight& weight,
                               double upto) {
  if (!(horizon > 0.0)) throw PreconditionError("window horizon must be positive");
  const double ceiling = driver.ceiling();
  const double stop = std::clamp(upto, 0.0, 1.0) * horizon;
  WindowAverage out{{0.0, 0.0}, 0};
  std::uint64_t index = start.index;
  double begin = 0.0;
  double until_crossing = ceiling - start.fiber;
  while (begin < stop) {
    const double end = std::min(stop, begin + until_crossing);
    const double mass = weight.cumulative(end / horizon) - weight.cumulative(begin / horizon);
    out.value += mass * std::polar(1.0, readout.angle(readout.group(driver.symbol(index))));
    if (end >= stop) break;
    begin = end;
    ++index;
    ++out.crossings;
    until_crossing = ceiling;
  }
  return out;
}

double event_mass(const SuspensionDriver& driver, const BlockEvent& event) {
  std::uint64_t hits = 0;
  for (std::uint64_t s = 0; s < driver.alphabet_size(); ++s) hits += event.contains(s) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(driver.alphabet_size());
}

double JointEventEstimate::sigma() const {
  return samples == 0 ? 0.0 : std::sqrt(product * (1.0 - product) / static_cast<double>(samples));
}

JointEventEstimate joint_event_estimate(const SuspensionDriver& driver,
                                        const std::vector<BlockEvent>& events,
                                        const std::vector<double>& times, std::size_t samples,
                                        std::uint64_t seed) {
  if (events.size() != times.size() || events.empty())
    throw PreconditionError("need one time per event");
  JointEventEstimate est;
  est.samples = samples;
  est.product = 1.0;
  for (const auto& e : events) est.product *= event_mass(driver, e);

  Stream rng(seed);
  std::size_t hits = 0;
  for (std::size_t n = 0; n < samples; ++n) {
    const DriverState origin = driver.random_state(rng);
    bool all = true;
    for (std::size_t e = 0; e < events.size() && all; ++e)
      all = events[e].contains(driver.symbol(driver.advance(origin, times[e])));
    hits += all ? 1 : 0;
  }
  est.joint = samples == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(samples);
  return est;
}

JointEventEstimate correlation_estimate(const SuspensionDriver& driver, const BlockEvent& a,
                                        const BlockEvent& b, double lag, std::size_t samples,
                                        std::uint64_t seed) {
  if (!(event_mass(driver, a) > 0.0) || !(event_mass(driver, b) > 0.0))
    throw PreconditionError("correlation events must have positive mass");
  return joint_event_estimate(driver, {a, b}, {0.0, lag}, samples, seed);
}

SeparatedEventsReport separated_events_test(const SuspensionDriver& driver,
                                            const SectorReadout& readout, double separation,
                                            std::size_t length, std::size_t trials,
                                            std::uint64_t seed) {
  if (!(separation >= 0.0)) throw PreconditionError("separation must be >= 0");
  if (length == 0) throw PreconditionError("need at least one event time");
  const std::size_t k = readout.branches;
  std::size_t words = 1;
  for (std::size_t n = 0; n < length; ++n) words *= k;

  SeparatedEventsReport report;
  report.trials = trials;
  report.empirical.assign(words, 0.0);
  report.product.assign(words, 1.0);
  for (std::size_t w = 0; w < words; ++w) {
    std::size_t code = w;
    for (std::size_t n = 0; n < length; ++n) {
      report.product[w] *= readout.group_mass(code % k);
      code /= k;
    }
  }

  Stream rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const DriverState origin = driver.random_state(rng);
    std::size_t code = 0;
    for (std::size_t n = 1; n <= length; ++n) {
      const DriverState s = driver.advance(origin, separation * static_cast<double>(n));
      code = code * k + readout.group(driver.symbol(s));
    }
    report.empirical[code] += 1.0;
  }
  for (std::size_t w = 0; w < words; ++w) {
    report.empirical[w] /= static_cast<double>(std::max<std::size_t>(trials, 1));
    report.max_deviation = std::max(report.max_deviation, std::abs(report.empirical[w] - report.product[w]));
  }
  return report;
}

}  // namespace skewflow
