#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "skewflow/core.hpp"
#include "skewflow/errors.hpp"

namespace skewflow {

/// Grid cells of side `mesh` aligned to `origin`, keeping only cells that hold
/// at least one sample. Cells are half-open boxes [lower, lower + mesh) ordered
/// lexicographically by grid index.
class BoxPartition {
 public:
  using GridIndex = std::vector<std::int64_t>;

  BoxPartition() = default;
  BoxPartition(Point origin, double mesh, std::vector<GridIndex> indices,
               std::vector<std::size_t> sample_counts);

  std::size_t size() const { return cells_.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(origin_.size()); }
  double mesh() const { return mesh_; }
  const Point& origin() const { return origin_; }

  const Box& cell(std::size_t i) const { return cells_.at(i); }
  const GridIndex& grid_index(std::size_t i) const { return indices_.at(i); }
  std::size_t sample_count(std::size_t i) const { return counts_.at(i); }

  /// Grid index of the (possibly unretained) cell containing p.
  GridIndex grid_index_of(const Point& p) const;
  /// Retained cell containing p under the half-open convention.
  std::optional<std::size_t> locate(const Point& p) const;

 private:
  Point origin_;
  double mesh_ = 0.0;
  std::vector<GridIndex> indices_;
  std::vector<Box> cells_;
  std::vector<std::size_t> counts_;
  std::map<GridIndex, std::size_t> lookup_;
};

/// Samples are the columns of `samples`. Throws PreconditionError on an empty
/// sample set or non-positive mesh.
BoxPartition build_box_partition(const Eigen::MatrixXd& samples, double mesh, const Point& origin);

/// Same, with the grid aligned to the system's domain box.
inline BoxPartition build_box_partition(const MapSystem& system, const Eigen::MatrixXd& samples,
                                        double mesh) {
  return build_box_partition(samples, mesh, system.domain.lower);
}

/// Column-stochastic m x m matrix: entry (i, j) is the probability of moving
/// from cell j to cell i.
struct TransitionMatrix {
  Eigen::MatrixXd probabilities;
  /// Transition counts behind an estimate; empty for matrices given directly.
  Eigen::MatrixXd counts;

  std::size_t size() const { return static_cast<std::size_t>(probabilities.cols()); }
  double operator()(std::size_t i, std::size_t j) const {
    return probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  /// Number of observed departures from cell j.
  double departures(std::size_t j) const {
    return counts.size() == 0 ? 0.0 : counts.col(static_cast<Eigen::Index>(j)).sum();
  }
  /// Target cells with positive probability from j, in increasing order.
  std::vector<std::size_t> successors(std::size_t j) const;
};

/// Wraps a given matrix, checking nonnegativity and unit column sums (1e-12).
TransitionMatrix make_transition_matrix(const Eigen::MatrixXd& probabilities);

/// Normalizes a count matrix column by column. Throws PreconditionError
/// naming the first column without departures.
TransitionMatrix transition_matrix_from_counts(const Eigen::MatrixXd& counts);

/// Counts cell-to-cell transitions along a trajectory. Count matrices from
/// disjoint shards can be added and passed to transition_matrix_from_counts.
Eigen::MatrixXd count_transitions(const Trajectory& traj, const BoxPartition& partition);

/// Ulam estimate of the transition matrix from one trajectory.
TransitionMatrix estimate_transition_matrix(const Trajectory& traj, const BoxPartition& partition);

/// Stationary probability vector of P (solves P v = v, sum v = 1).
Eigen::VectorXd stationary_distribution(const TransitionMatrix& transition);

enum class ChartDirection { to_model, to_cell };

/// Affine bijection between the model fiber [0, 1]^d and a cell.
template <typename Scalar>
class CellChart {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  CellChart(std::size_t cell, AxisBox<Scalar> box) : cell_(cell), box_(std::move(box)) {}

  std::size_t cell() const { return cell_; }
  const AxisBox<Scalar>& box() const { return box_; }

  Vector to_cell(const Vector& u) const {
    if (u.size() != box_.dimension() || (u.array() < -slack()).any() ||
        (u.array() > Scalar(1) + slack()).any())
      throw DomainError("model point outside [0, 1]^d");
    return box_.lower + (u.array() * box_.side().array()).matrix();
  }

  Vector to_model(const Vector& p) const {
    const Scalar scale = Scalar(1) + box_.upper.cwiseAbs().maxCoeff();
    if (!box_.contains(p, slack() * scale)) throw DomainError("point outside the chart's cell");
    return ((p - box_.lower).array() / box_.side().array()).matrix();
  }

  Vector operator()(const Vector& p, ChartDirection direction) const {
    return direction == ChartDirection::to_model ? to_model(p) : to_cell(p);
  }

 private:
  static constexpr Scalar slack() { return Scalar(1e-12); }

  std::size_t cell_;
  AxisBox<Scalar> box_;
};

using Chart = CellChart<double>;

inline Chart make_chart(const BoxPartition& partition, std::size_t cell) {
  return Chart(cell, partition.cell(cell));
}

inline Point chart(const Chart& c, const Point& p, ChartDirection direction) {
  return c(p, direction);
}

/// Image of y under the cell map phi_{from -> to}, plus whether it was clamped.
struct CellMapResult {
  Point point;
  bool clamped = false;
};

/// phi_{from -> to}(y): f(y) when it lies in the closed target cell, otherwise
/// its coordinatewise clamp onto that cell. Throws PreconditionError if y is
/// not in the closed source cell.
CellMapResult apply_cell_map(std::size_t from, std::size_t to, const Point& y,
                             const MapSystem& system, const BoxPartition& partition);

inline Point cell_map_apply(std::size_t from, std::size_t to, const Point& y,
                            const MapSystem& system, const BoxPartition& partition) {
  return apply_cell_map(from, to, y, system, partition).point;
}

/// Model-fiber conjugate h_to^{-1} o phi_{from -> to} o h_from.
Point model_cell_map(std::size_t from, std::size_t to, const Point& u, const MapSystem& system,
                     const BoxPartition& partition);

}  // namespace skewflow
