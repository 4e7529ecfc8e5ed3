#include "skewflow/stepskew.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "skewflow/errors.hpp"

namespace skewflow {

StepSkewProcess::StepSkewProcess(MapSystem system, BoxPartition partition,
                                 TransitionMatrix transition, Eigen::MatrixXd attractor)
    : system_(std::move(system)),
      partition_(std::move(partition)),
      transition_(std::move(transition)),
      attractor_(std::move(attractor)) {
  const std::size_t m = partition_.size();
  if (transition_.size() != m)
    throw PreconditionError("transition matrix size does not match the partition");
  if (attractor_.cols() == 0) throw PreconditionError("step-skew process needs attractor samples");

  samples_by_cell_.resize(m);
  sample_cells_.reserve(static_cast<std::size_t>(attractor_.cols()));
  for (Eigen::Index n = 0; n < attractor_.cols(); ++n) {
    auto cell = partition_.locate(attractor_.col(n));
    if (!cell) throw PreconditionError("attractor sample " + std::to_string(n) + " is outside all cells");
    sample_cells_.push_back(*cell);
    samples_by_cell_[*cell].push_back(static_cast<std::size_t>(n));
  }

  cumulative_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    double running = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double p = transition_(i, j);
      if (p > 0.0) {
        running += p;
        cumulative_[j].emplace_back(i, running);
      }
    }
  }
}

std::size_t StepSkewProcess::successor(std::size_t j, double u) const {
  const auto& column = cumulative_.at(j);
  if (column.empty()) throw PreconditionError("column " + std::to_string(j) + " has no mass");
  for (const auto& [i, cum] : column)
    if (u < cum) return i;
  return column.back().first;  // u above a column sum rounded below 1
}

StepSkewState StepSkewProcess::random_start(Stream& rng) const {
  const std::size_t n = rng.below(static_cast<std::size_t>(attractor_.cols()));
  return {sample_cells_[n], attractor_.col(static_cast<Eigen::Index>(n))};
}

StepSkewState StepSkewProcess::random_start_in(std::size_t j, Stream& rng) const {
  const auto& members = samples_by_cell_.at(j);
  if (members.empty()) throw PreconditionError("cell " + std::to_string(j) + " holds no samples");
  const std::size_t n = members[rng.below(members.size())];
  return {j, attractor_.col(static_cast<Eigen::Index>(n))};
}

StepOutcome step_skew_step(const StepSkewState& state, const StepSkewProcess& process, double u) {
  const std::size_t next = process.successor(state.cell, u);
  const CellMapResult image =
      apply_cell_map(state.cell, next, state.y, process.system(), process.partition());
  return {{next, image.point}, image.clamped};
}

std::vector<KernelAtom> markov_kernel(const Point& y, std::size_t j, const StepSkewProcess& process) {
  std::vector<KernelAtom> atoms;
  for (std::size_t i : process.transition().successors(j))
    atoms.push_back({i, cell_map_apply(j, i, y, process.system(), process.partition()),
                     process.transition()(i, j)});
  return atoms;
}

PathSample sample_step_skew_path(const StepSkewProcess& process, const StepSkewState& start,
                                 std::size_t steps, Stream& rng, std::uint64_t seed) {
  PathSample path;
  path.source = PathSource::stepskew;
  path.seed = seed;
  path.cells.reserve(steps + 1);
  path.points.reserve(steps + 1);
  path.clamped.reserve(steps);
  path.cells.push_back(start.cell);
  path.points.push_back(start.y);
  StepSkewState state = start;
  for (std::size_t n = 0; n < steps; ++n) {
    StepOutcome out = step_skew_step(state, process, rng);
    state = std::move(out.state);
    path.cells.push_back(state.cell);
    path.points.push_back(state.y);
    path.clamped.push_back(out.clamped);
  }
  return path;
}

std::vector<PathSample> sample_step_skew_paths(const StepSkewProcess& process, std::size_t count,
                                               std::size_t steps, std::uint64_t seed,
                                               unsigned jobs) {
  std::vector<PathSample> paths(count);
  parallel_for(count, jobs, [&](std::size_t t) {
    const std::uint64_t path_seed = derive_seed(seed, t);
    Stream rng(path_seed);
    const StepSkewState start = process.random_start(rng);
    paths[t] = sample_step_skew_path(process, start, steps, rng, path_seed);
  });
  return paths;
}

double directed_hausdorff(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
  if (from.cols() == 0) return 0.0;
  if (to.cols() == 0) return std::numeric_limits<double>::infinity();
  if (from.rows() != to.rows()) throw PreconditionError("point sets differ in dimension");
  const Eigen::Index d = from.rows();

  // Targets sorted by the first coordinate: the sup distance is at least the
  // first-coordinate gap, so the outward scan from a query stops once the gap
  // exceeds the best distance found.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(to.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return to(0, a) < to(0, b); });
  std::vector<double> key(order.size());
  Eigen::MatrixXd sorted(d, to.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.col(static_cast<Eigen::Index>(i)) = to.col(order[i]);
    key[i] = to(0, order[i]);
  }

  // Queries in a fixed pseudo-random order so the running maximum grows early.
  std::vector<Eigen::Index> queries(static_cast<std::size_t>(from.cols()));
  std::iota(queries.begin(), queries.end(), Eigen::Index{0});
  Stream rng(0x5EED0001ULL);
  for (std::size_t i = queries.size(); i > 1; --i) std::swap(queries[i - 1], queries[rng.below(i)]);

  auto distance = [&](const double* x, std::size_t q) {
    const double* y = sorted.col(static_cast<Eigen::Index>(q)).data();
    double dist = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) dist = std::max(dist, std::abs(x[k] - y[k]));
    return dist;
  };

  double running_max = 0.0;
  const std::size_t n = key.size();
  for (Eigen::Index p : queries) {
    const double* x = from.col(p).data();
    const auto split = static_cast<std::size_t>(std::lower_bound(key.begin(), key.end(), x[0]) - key.begin());
    double best = std::numeric_limits<double>::infinity();
    std::size_t right = split;
    std::size_t left = split;
    while (best >= running_max) {
      const double right_gap = right < n ? key[right] - x[0] : std::numeric_limits<double>::infinity();
      const double left_gap = left > 0 ? x[0] - key[left - 1] : std::numeric_limits<double>::infinity();
      const double gap = std::min(right_gap, left_gap);
      if (!(gap < best)) break;
      if (right_gap <= left_gap) best = std::min(best, distance(x, right++));
      else best = std::min(best, distance(x, --left));
    }
    if (best > running_max) running_max = best;
  }
  return running_max;
}

StationaryEstimate estimate_stationary(const StepSkewProcess& process, std::size_t burn,
                                       std::size_t count, std::uint64_t seed) {
  if (count == 0) throw PreconditionError("stationary estimate needs at least one sample");
  Stream rng(seed);
  StepSkewState state = process.random_start(rng);
  for (std::size_t n = 0; n < burn; ++n) state = step_skew_step(state, process, rng).state;

  StationaryEstimate est;
  const auto m = static_cast<Eigen::Index>(process.partition().size());
  est.samples.resize(static_cast<Eigen::Index>(process.system().dimension),
                     static_cast<Eigen::Index>(count));
  est.cells.reserve(count);
  est.cell_marginal = Eigen::VectorXd::Zero(m);
  for (std::size_t n = 0; n < count; ++n) {
    state = step_skew_step(state, process, rng).state;
    est.samples.col(static_cast<Eigen::Index>(n)) = state.y;
    est.cells.push_back(state.cell);
    est.cell_marginal[static_cast<Eigen::Index>(state.cell)] += 1.0;
  }
  est.cell_marginal /= static_cast<double>(count);
  est.sample_to_cloud = directed_hausdorff(est.samples, process.attractor());
  est.cloud_to_sample = directed_hausdorff(process.attractor(), est.samples);
  return est;
}

double clamp_free_probability(const StepSkewProcess& process, std::size_t steps) {
  const auto& cloud = process.attractor();
  const auto& transition = process.transition();
  double total = 0.0;
  for (Eigen::Index n = 0; n < cloud.cols(); ++n) {
    std::size_t cell = process.cell_of_sample(static_cast<std::size_t>(n));
    Point x = cloud.col(n);
    double mass = 1.0;
    for (std::size_t step = 0; step < steps && mass > 0.0; ++step) {
      x = process.system().map(x);
      auto next = process.partition().locate(x);
      if (!next) {
        mass = 0.0;
        break;
      }
      mass *= transition(*next, cell);
      cell = *next;
    }
    total += mass;
  }
  return total / static_cast<double>(cloud.cols());
}

MatchFraction exact_match_fraction(const StepSkewProcess& process, std::size_t steps,
                                   std::size_t trials, std::uint64_t seed, unsigned jobs) {
  if (trials == 0) throw PreconditionError("exact_match_fraction needs at least one trial");
  std::vector<char> matched(trials, 0);
  parallel_for(trials, jobs, [&](std::size_t t) {
    Stream rng(derive_seed(seed, t));
    StepSkewState state = process.random_start(rng);
    bool clean = true;
    for (std::size_t n = 0; n < steps && clean; ++n) {
      StepOutcome out = step_skew_step(state, process, rng);
      clean = !out.clamped;
      state = std::move(out.state);
    }
    matched[t] = clean ? 1 : 0;
  });
  MatchFraction result;
  result.trials = trials;
  result.matches = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), 1));
  result.fraction = static_cast<double>(result.matches) / static_cast<double>(trials);
  result.oracle = clamp_free_probability(process, steps);
  return result;
}

}  // namespace skewflow
