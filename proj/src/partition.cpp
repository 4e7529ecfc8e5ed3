#include "skewflow/partition.hpp"

#include <cmath>
#include <string>

namespace skewflow {

BoxPartition::BoxPartition(Point origin, double mesh, std::vector<GridIndex> indices,
                           std::vector<std::size_t> sample_counts)
    : origin_(std::move(origin)),
      mesh_(mesh),
      indices_(std::move(indices)),
      counts_(std::move(sample_counts)) {
  cells_.reserve(indices_.size());
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    Point lower(origin_.size());
    for (Eigen::Index k = 0; k < origin_.size(); ++k)
      lower[k] = origin_[k] + static_cast<double>(indices_[i][static_cast<std::size_t>(k)]) * mesh_;
    cells_.push_back(Box{lower, (lower.array() + mesh_).matrix()});
    lookup_.emplace(indices_[i], i);
  }
}

BoxPartition::GridIndex BoxPartition::grid_index_of(const Point& p) const {
  GridIndex index(static_cast<std::size_t>(p.size()));
  for (Eigen::Index k = 0; k < p.size(); ++k)
    index[static_cast<std::size_t>(k)] =
        static_cast<std::int64_t>(std::floor((p[k] - origin_[k]) / mesh_));
  return index;
}

std::optional<std::size_t> BoxPartition::locate(const Point& p) const {
  if (static_cast<std::size_t>(p.size()) != dimension() || !p.allFinite()) return std::nullopt;
  auto it = lookup_.find(grid_index_of(p));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

BoxPartition build_box_partition(const Eigen::MatrixXd& samples, double mesh, const Point& origin) {
  if (samples.cols() == 0) throw PreconditionError("cannot partition an empty sample set");
  if (!(mesh > 0.0)) throw PreconditionError("mesh must be positive");
  if (samples.rows() != origin.size()) throw PreconditionError("origin dimension mismatch");

  // Temporary partition with no cells, used only for grid indexing.
  BoxPartition grid(origin, mesh, {}, {});
  std::map<BoxPartition::GridIndex, std::size_t> occupancy;
  for (Eigen::Index n = 0; n < samples.cols(); ++n) ++occupancy[grid.grid_index_of(samples.col(n))];

  std::vector<BoxPartition::GridIndex> indices;
  std::vector<std::size_t> counts;
  indices.reserve(occupancy.size());
  counts.reserve(occupancy.size());
  for (auto& [index, count] : occupancy) {
    indices.push_back(index);
    counts.push_back(count);
  }
  return BoxPartition(origin, mesh, std::move(indices), std::move(counts));
}

std::vector<std::size_t> TransitionMatrix::successors(std::size_t j) const {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i)
    if (probabilities(i, static_cast<Eigen::Index>(j)) > 0.0) out.push_back(static_cast<std::size_t>(i));
  return out;
}

TransitionMatrix make_transition_matrix(const Eigen::MatrixXd& probabilities) {
  if (probabilities.rows() != probabilities.cols() || probabilities.size() == 0)
    throw PreconditionError("transition matrix must be square and nonempty");
  if ((probabilities.array() < 0.0).any() || !probabilities.allFinite())
    throw PreconditionError("transition matrix has negative or non-finite entries");
  for (Eigen::Index j = 0; j < probabilities.cols(); ++j)
    if (std::abs(probabilities.col(j).sum() - 1.0) > 1e-12)
      throw PreconditionError("column " + std::to_string(j) + " does not sum to 1");
  return TransitionMatrix{probabilities, {}};
}

TransitionMatrix transition_matrix_from_counts(const Eigen::MatrixXd& counts) {
  TransitionMatrix t;
  t.counts = counts;
  t.probabilities.resize(counts.rows(), counts.cols());
  for (Eigen::Index j = 0; j < counts.cols(); ++j) {
    const double total = counts.col(j).sum();
    if (!(total > 0.0))
      throw PreconditionError("cell " + std::to_string(j) + " is never visited by the trajectory");
    t.probabilities.col(j) = counts.col(j) / total;
  }
  return t;
}

Eigen::MatrixXd count_transitions(const Trajectory& traj, const BoxPartition& partition) {
  const auto m = static_cast<Eigen::Index>(partition.size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, m);
  if (traj.size() == 0) return counts;
  auto cell_of = [&](std::size_t n) {
    auto c = partition.locate(traj.at(n));
    if (!c) throw DomainError("trajectory point " + std::to_string(n) + " lies outside all cells");
    return static_cast<Eigen::Index>(*c);
  };
  Eigen::Index from = cell_of(0);
  for (std::size_t n = 1; n < traj.size(); ++n) {
    const Eigen::Index to = cell_of(n);
    counts(to, from) += 1.0;
    from = to;
  }
  return counts;
}

TransitionMatrix estimate_transition_matrix(const Trajectory& traj, const BoxPartition& partition) {
  return transition_matrix_from_counts(count_transitions(traj, partition));
}

Eigen::VectorXd stationary_distribution(const TransitionMatrix& transition) {
  const Eigen::Index m = transition.probabilities.rows();
  Eigen::MatrixXd system = transition.probabilities - Eigen::MatrixXd::Identity(m, m);
  system.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs[m - 1] = 1.0;
  return system.fullPivLu().solve(rhs);
}

CellMapResult apply_cell_map(std::size_t from, std::size_t to, const Point& y,
                             const MapSystem& system, const BoxPartition& partition) {
  const Box& source = partition.cell(from);
  const double scale = 1.0 + source.upper.cwiseAbs().maxCoeff();
  if (!source.contains(y, 1e-12 * scale))
    throw PreconditionError("point is not in source cell " + std::to_string(from));
  const Point image = system.map(y);
  const Box& target = partition.cell(to);
  CellMapResult result;
  result.point = target.clamp(image);
  result.clamped = (result.point.array() != image.array()).any();
  return result;
}

Point model_cell_map(std::size_t from, std::size_t to, const Point& u, const MapSystem& system,
                     const BoxPartition& partition) {
  const Point y = make_chart(partition, from).to_cell(u);
  return make_chart(partition, to).to_model(cell_map_apply(from, to, y, system, partition));
}

}  // namespace skewflow
