#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles/interval_shadowing.hpp"
#include "skewflow/core.hpp"
#include "skewflow/errors.hpp"
#include "skewflow/partition.hpp"
#include "skewflow/stepskew.hpp"

using namespace skewflow;

namespace {

Point p1(double x) { return Point::Constant(1, x); }

StepSkewProcess make_process(const MapSystem& f, double mesh, std::size_t steps, std::uint64_t seed) {
  const auto traj = attractor_orbit(f, steps, seed);
  const Eigen::MatrixXd departures = traj.points.leftCols(traj.points.cols() - 1);
  const auto partition = build_box_partition(f, departures, mesh);
  Trajectory kept{traj.points};
  if (!partition.locate(traj.points.col(traj.points.cols() - 1))) kept.points = departures;
  const auto p = estimate_transition_matrix(kept, partition);
  return StepSkewProcess(f, partition, p, departures);
}

double sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace

TEST_CASE("identity map chain never moves") {
  const auto f = identity_map(1);
  Eigen::MatrixXd cloud(1, 3);
  cloud << 0.1, 0.5, 0.9;
  const auto partition = build_box_partition(cloud, 0.25, p1(0.0));
  const auto process = StepSkewProcess(f, partition, make_transition_matrix(Eigen::MatrixXd::Identity(3, 3)), cloud);
  Stream rng(1);
  StepSkewState state{1, p1(0.5)};
  for (int n = 0; n < 100; ++n) {
    const auto out = step_skew_step(state, process, rng);
    CHECK(out.state.cell == 1);
    CHECK(out.state.y[0] == 0.5);
    CHECK_FALSE(out.clamped);
    state = out.state;
  }
  const auto kernel = markov_kernel(p1(0.5), 1, process);
  REQUIRE(kernel.size() == 1);
  CHECK(kernel[0].mass == 1.0);
  CHECK(kernel[0].point[0] == 0.5);
}

TEST_CASE("doubling two-cell step outcomes and kernel") {
  const auto process = make_process(doubling_map(), 0.5, 1000000, 2);
  const auto& p = process.transition();
  REQUIRE(process.partition().size() == 2);

  const auto low = step_skew_step({0, p1(0.2)}, process, 0.0);
  CHECK(low.state.cell == 0);
  CHECK(low.state.y[0] == 0.4);
  CHECK_FALSE(low.clamped);
  const auto high = step_skew_step({0, p1(0.2)}, process, 0.999);
  CHECK(high.state.cell == 1);
  CHECK(high.state.y[0] == 0.5);
  CHECK(high.clamped);
  // Inverse CDF in increasing target order.
  CHECK(process.successor(0, std::nextafter(p(0, 0), 0.0)) == 0);
  CHECK(process.successor(0, p(0, 0)) == 1);

  const auto kernel = markov_kernel(p1(0.2), 0, process);
  REQUIRE(kernel.size() == 2);
  CHECK(kernel[0].point[0] == 0.4);
  CHECK(kernel[1].point[0] == 0.5);
  CHECK(kernel[0].mass + kernel[1].mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(kernel[0].mass - 0.5) <= 3.0 * sigma(0.5, p.departures(0)));
}

TEST_CASE("sampler frequencies match the kernel") {
  const auto process = make_process(doubling_map(), 0.5, 1000000, 3);
  const auto kernel = markov_kernel(p1(0.2), 0, process);
  Stream rng(4);
  std::map<double, double> counts;
  const double draws = 100000;
  for (int n = 0; n < 100000; ++n) counts[step_skew_step({0, p1(0.2)}, process, rng).state.y[0]] += 1.0;
  REQUIRE(counts.size() == kernel.size());
  for (const auto& atom : kernel)
    CHECK(std::abs(counts[atom.point[0]] / draws - atom.mass) <= 3.0 * sigma(atom.mass, draws));
  // The kernel masses are themselves one half up to the estimation error.
  for (const auto& atom : kernel) CHECK(std::abs(counts[atom.point[0]] / draws - 0.5) <= 3.0 * sigma(0.5, draws) + 0.003);
}

TEST_CASE("paths stay in their closed cells and clamp-free paths are exact orbits") {
  const auto f = logistic_map();
  const auto process = make_process(f, 0.05, 200000, 5);
  const auto paths = sample_step_skew_paths(process, 2000, 4, 6);
  std::size_t clean = 0;
  for (const auto& path : paths) {
    bool clamped = false;
    for (std::size_t n = 0; n < path.length(); ++n) {
      CHECK(process.partition().cell(path.cells[n]).contains(path.points[n]));
      if (n > 0) clamped = clamped || path.clamped[n - 1];
    }
    if (clamped) continue;
    ++clean;
    const auto orbit = iterate_map(f, path.points.front(), 4);
    for (std::size_t n = 0; n < path.length(); ++n) CHECK(std::abs(path.points[n][0] - orbit.at(n)[0]) <= 1e-12);
  }
  CHECK(clean > 0);
}

TEST_CASE("replay is deterministic and independent of the job count") {
  const auto process = make_process(rotation_map(0.1234), 0.1, 100000, 7);
  const auto a = sample_step_skew_paths(process, 500, 8, 42, 1);
  const auto b = sample_step_skew_paths(process, 500, 8, 42, 3);
  const auto c = sample_step_skew_paths(process, 500, 8, 43, 1);
  bool differs = false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].cells == b[t].cells);
    for (std::size_t n = 0; n < a[t].length(); ++n) CHECK(a[t].points[n] == b[t].points[n]);
    differs = differs || a[t].cells != c[t].cells;
  }
  CHECK(differs);
}

TEST_CASE("stationary cell marginal of the doubling chain") {
  const auto process = make_process(doubling_map(), 0.5, 1000000, 8);
  const auto est = estimate_stationary(process, 100, 10000, 9);
  CHECK(est.samples.cols() == 10000);
  for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::abs(est.cell_marginal[i] - 0.5) <= 3.0 * sigma(0.5, 10000));
}

TEST_CASE("identity chain stationary samples sit at the start point") {
  const auto f = identity_map(1);
  Eigen::MatrixXd cloud(1, 1);
  cloud << 0.3;
  const auto partition = build_box_partition(cloud, 0.1, p1(0.0));
  const StepSkewProcess process(f, partition, make_transition_matrix(Eigen::MatrixXd::Identity(1, 1)), cloud);
  const auto est = estimate_stationary(process, 10, 100, 1);
  CHECK((est.samples.array() == 0.3).all());
  CHECK(est.sample_to_cloud == 0.0);
  CHECK(est.cloud_to_sample == 0.0);
}

TEST_CASE("logistic support bounds") {
  for (double delta : {0.1, 0.05}) {
    const auto process = make_process(logistic_map(), delta, 200000, 10);
    const auto est = estimate_stationary(process, 1000, 10000, 11);
    CHECK(est.sample_to_cloud <= delta);
    CHECK(est.cloud_to_sample <= 2.0 * delta);
  }
}

TEST_CASE("directed Hausdorff distance") {
  Eigen::MatrixXd a(1, 3), b(1, 2);
  a << 0.0, 0.5, 1.0;
  b << 0.0, 0.4;
  CHECK(directed_hausdorff(a, b) == doctest::Approx(0.6));
  CHECK(directed_hausdorff(b, a) == doctest::Approx(0.1));
  Stream rng(12);
  Eigen::MatrixXd x(2, 300), y(2, 400);
  for (Eigen::Index k = 0; k < x.cols(); ++k) x.col(k) = Eigen::Vector2d(rng.uniform(), rng.uniform());
  for (Eigen::Index k = 0; k < y.cols(); ++k) y.col(k) = Eigen::Vector2d(rng.uniform(), rng.uniform());
  double brute = 0.0;
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    double nearest = 1e300;
    for (Eigen::Index q = 0; q < y.cols(); ++q) nearest = std::min(nearest, sup_distance(x.col(p), y.col(q)));
    brute = std::max(brute, nearest);
  }
  CHECK(directed_hausdorff(x, y) == brute);
}

TEST_CASE("exact match fractions") {
  const auto f = identity_map(1);
  Eigen::MatrixXd cloud(1, 2);
  cloud << 0.2, 0.7;
  const auto partition = build_box_partition(cloud, 0.5, p1(0.0));
  const StepSkewProcess still(f, partition, make_transition_matrix(Eigen::MatrixXd::Identity(2, 2)), cloud);
  CHECK(exact_match_fraction(still, 5, 100, 1).fraction == 1.0);

  const auto doubling = make_process(doubling_map(), 0.5, 1000000, 13);
  const auto match = exact_match_fraction(doubling, 4, 100000, 14);
  CHECK(std::abs(match.fraction - 0.0625) <= 3.0 * sigma(0.0625, 100000) + 0.002);
  CHECK(std::abs(match.fraction - match.oracle) <= 3.0 * sigma(match.oracle, 100000));
}

TEST_CASE("rotation exact match against the straddle-mass oracle") {
  const double alpha = (std::sqrt(5.0) - 1.0) / 2.0;
  const auto process = make_process(rotation_map(alpha), 1.0 / 64.0, 1000000, 15);
  REQUIRE(process.partition().size() == 64);
  const oracle::IntervalChainOracle chain(1, alpha, oracle::uniform_cells(64), process.transition().probabilities);
  const auto pieces = chain.run(10, oracle::IntervalChainOracle::Mode::clamp_free, 0.0);
  const auto& cloud = process.attractor();
  const double exact = oracle::IntervalChainOracle::average(
      pieces, std::vector<double>(cloud.data(), cloud.data() + cloud.size()));
  const auto match = exact_match_fraction(process, 10, 100000, 16);
  CHECK(std::abs(match.fraction - exact) <= 3.0 * sigma(exact, 100000));
  CHECK(match.oracle == doctest::Approx(exact).epsilon(1e-9));
}
