#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles/preimage_measure.hpp"
#include "skewflow/core.hpp"
#include "skewflow/errors.hpp"
#include "skewflow/partition.hpp"

using namespace skewflow;

namespace {

Point p1(double x) { return Point::Constant(1, x); }

Eigen::MatrixXd uniform_samples(std::size_t n, std::uint64_t seed) {
  Stream rng(seed);
  Eigen::MatrixXd s(1, static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < s.cols(); ++k) s(0, k) = rng.uniform();
  return s;
}

// Every entry of the estimate within 3 binomial sigmas of the oracle.
void check_against_oracle(const TransitionMatrix& estimate, const Eigen::MatrixXd& exact) {
  REQUIRE(estimate.size() == static_cast<std::size_t>(exact.cols()));
  for (std::size_t j = 0; j < estimate.size(); ++j) {
    const double n = estimate.departures(j);
    for (std::size_t i = 0; i < estimate.size(); ++i) {
      const double p = exact(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double sigma = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(estimate(i, j) - p) <= 3.0 * sigma + 1e-15);
    }
  }
}

}  // namespace

TEST_CASE("build_box_partition counts cells") {
  const auto quarters = build_box_partition(uniform_samples(1000, 1), 0.25, p1(0.0));
  CHECK(quarters.size() == 4);
  std::size_t total = 0;
  for (std::size_t i = 0; i < quarters.size(); ++i) total += quarters.sample_count(i);
  CHECK(total == 1000);
  CHECK(quarters.cell(1).lower[0] == 0.25);
  CHECK(quarters.cell(1).upper[0] == 0.5);

  Eigen::MatrixXd single(1, 1);
  single(0, 0) = 0.37;
  const auto one = build_box_partition(single, 0.1, p1(0.0));
  REQUIRE(one.size() == 1);
  CHECK(one.cell(0).contains_half_open(p1(0.37)));
  CHECK(one.sample_count(0) == 1);
}

TEST_CASE("build_box_partition rejects bad input") {
  CHECK_THROWS_AS(build_box_partition(Eigen::MatrixXd(1, 0), 0.1, p1(0.0)), PreconditionError);
  CHECK_THROWS_AS(build_box_partition(uniform_samples(10, 2), 0.0, p1(0.0)), PreconditionError);
  CHECK_THROWS_AS(build_box_partition(uniform_samples(10, 2), -1.0, p1(0.0)), PreconditionError);
}

TEST_CASE("Henon partition covers every sample exactly once") {
  const auto henon = henon_map();
  const auto traj = attractor_orbit(henon, 100000, 9);
  const auto partition = build_box_partition(henon, traj.points, 0.1);
  std::vector<std::size_t> hits(partition.size(), 0);
  for (std::size_t n = 0; n < traj.size(); ++n) {
    const auto cell = partition.locate(traj.at(n));
    REQUIRE(cell.has_value());
    ++hits[*cell];
    std::size_t containing = 0;
    for (std::size_t i = 0; i < partition.size(); ++i)
      containing += partition.cell(i).contains_half_open(traj.at(n)) ? 1 : 0;
    if (n % 997 == 0) CHECK(containing == 1);
  }
  std::set<BoxPartition::GridIndex> distinct;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    CHECK(hits[i] == partition.sample_count(i));
    CHECK(hits[i] >= 1);
    CHECK(partition.cell(i).side().maxCoeff() <= 0.1 + 1e-15);
    distinct.insert(partition.grid_index(i));
  }
  CHECK(distinct.size() == partition.size());
}

TEST_CASE("doubling transition matrix is close to one half") {
  const auto f = doubling_map();
  const auto traj = attractor_orbit(f, 1000000, 21);
  const auto partition = build_box_partition(f, traj.points, 0.5);
  REQUIRE(partition.size() == 2);
  const auto p = estimate_transition_matrix(traj, partition);
  const double bound = 3.0 * std::sqrt(0.25 / 5e5);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(p(i, j) - 0.5) <= bound);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(p.probabilities.col(j).sum() - 1.0) <= 1e-12);
}

TEST_CASE("doubling transition matrices match the preimage-measure oracle") {
  const auto f = doubling_map();
  const auto traj = attractor_orbit(f, 1000000, 22);
  for (std::size_t m : {2u, 4u, 8u}) {
    const auto partition = build_box_partition(f, traj.points, 1.0 / static_cast<double>(m));
    REQUIRE(partition.size() == m);
    const auto estimate = estimate_transition_matrix(traj, partition);
    check_against_oracle(estimate, oracle::preimage_measure_matrix(2, 0.0, oracle::uniform_cells(m)));
  }
}

TEST_CASE("rotation transition matrices match the preimage-measure oracle") {
  const double alpha = (std::sqrt(5.0) - 1.0) / 2.0;
  const auto f = rotation_map(alpha);
  const auto traj = attractor_orbit(f, 1000000, 23);
  const auto partition = build_box_partition(f, traj.points, 1.0 / 64.0);
  REQUIRE(partition.size() == 64);
  const auto estimate = estimate_transition_matrix(traj, partition);
  check_against_oracle(estimate, oracle::preimage_measure_matrix(1, alpha, oracle::uniform_cells(64)));
}

TEST_CASE("quarter rotation gives the cyclic permutation exactly") {
  const auto f = rotation_map(0.25);
  const auto traj = iterate_map(f, p1(0.1), 1000);
  const auto partition = build_box_partition(f, traj.points, 0.25);
  REQUIRE(partition.size() == 4);
  const auto p = estimate_transition_matrix(traj, partition);
  const Eigen::MatrixXd exact = oracle::preimage_measure_matrix(1, 0.25, oracle::uniform_cells(4));
  CHECK((p.probabilities.array() == exact.array()).all());
  for (std::size_t j = 0; j < 4; ++j) CHECK(p((j + 1) % 4, j) == 1.0);
}

TEST_CASE("identity map gives the identity matrix from merged shards") {
  const auto f = identity_map(1);
  const auto partition = build_box_partition(uniform_samples(1000, 3), 0.2, p1(0.0));
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(5, 5);
  for (double x0 : {0.05, 0.3, 0.5, 0.7, 0.95}) counts += count_transitions(iterate_map(f, p1(x0), 10), partition);
  const auto p = transition_matrix_from_counts(counts);
  CHECK(p.probabilities == Eigen::MatrixXd::Identity(5, 5));
}

TEST_CASE("transition estimation errors") {
  const auto partition = build_box_partition(uniform_samples(1000, 4), 0.5, p1(0.0));
  const auto stuck = iterate_map(identity_map(1), p1(0.2), 5);
  try {
    estimate_transition_matrix(stuck, partition);
    FAIL("expected an unvisited-cell error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("cell 1") != std::string::npos);
  }
  Eigen::MatrixXd outside(1, 2);
  outside << 0.2, 1.5;
  CHECK_THROWS_AS(estimate_transition_matrix(Trajectory{outside}, partition), DomainError);
}

TEST_CASE("make_transition_matrix validates stochasticity") {
  Eigen::MatrixXd good(2, 2);
  good << 0.5, 0.25, 0.5, 0.75;
  CHECK_NOTHROW(make_transition_matrix(good));
  Eigen::MatrixXd bad = good;
  bad(0, 0) = 0.6;
  CHECK_THROWS_AS(make_transition_matrix(bad), PreconditionError);
  bad = good;
  bad(0, 1) = -0.25;
  bad(1, 1) = 1.25;
  CHECK_THROWS_AS(make_transition_matrix(bad), PreconditionError);
  const Eigen::VectorXd pi = stationary_distribution(make_transition_matrix(good));
  CHECK(pi[0] == doctest::Approx(1.0 / 3.0));
  CHECK(pi[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("cell_map_apply follows the map or clamps") {
  const auto f = doubling_map();
  const auto partition = build_box_partition(uniform_samples(100, 5), 0.5, p1(0.0));
  const auto same = apply_cell_map(0, 0, p1(0.2), f, partition);
  CHECK(same.point[0] == 0.4);
  CHECK_FALSE(same.clamped);
  const auto other = apply_cell_map(0, 1, p1(0.2), f, partition);
  CHECK(other.point[0] == 0.5);
  CHECK(other.clamped);
  CHECK_THROWS_AS(cell_map_apply(1, 0, p1(0.2), f, partition), PreconditionError);

  const auto id = identity_map(1);
  CHECK(cell_map_apply(1, 1, p1(0.7), id, partition)[0] == 0.7);
}

TEST_CASE("cell maps agree with f on X_ji and stay in the closed target cell") {
  const auto f = logistic_map();
  const auto traj = attractor_orbit(f, 20000, 6);
  const auto partition = build_box_partition(f, traj.points, 0.05);
  Stream rng(7);
  for (int n = 0; n < 5000; ++n) {
    const Point y = traj.at(rng.below(traj.size()));
    const std::size_t j = *partition.locate(y);
    for (std::size_t i = 0; i < partition.size(); ++i) {
      const auto image = apply_cell_map(j, i, y, f, partition);
      CHECK(partition.cell(i).contains(image.point));
      if (partition.cell(i).contains(f.map(y))) {
        CHECK_FALSE(image.clamped);
        CHECK(image.point == f.map(y));
      }
    }
  }
}

TEST_CASE("cell charts") {
  const Chart half(0, Box{p1(0.5), p1(1.0)});
  CHECK(half.to_cell(p1(0.5))[0] == 0.75);
  CHECK(chart(half, p1(0.75), ChartDirection::to_model)[0] == 0.5);
  CHECK_THROWS_AS(half.to_model(p1(0.2)), DomainError);
  CHECK_THROWS_AS(half.to_cell(p1(1.5)), DomainError);

  const Chart box(3, Box{Eigen::Vector2d(-1.8, 0.1), Eigen::Vector2d(-1.7, 0.2)});
  Stream rng(8);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Point u = Eigen::Vector2d(rng.uniform(), rng.uniform());
    worst = std::max(worst, sup_distance(box.to_model(box.to_cell(u)), u));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("model cell map conjugates the cell map through the charts") {
  const auto f = doubling_map();
  const auto partition = build_box_partition(uniform_samples(100, 9), 0.5, p1(0.0));
  const Point u = model_cell_map(0, 0, p1(0.4), f, partition);
  CHECK(u[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(model_cell_map(0, 1, p1(0.4), f, partition)[0] == doctest::Approx(0.0));
}
