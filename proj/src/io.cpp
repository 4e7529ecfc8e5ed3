#include "skewflow/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "skewflow/errors.hpp"

namespace skewflow::io {

std::string format_double(double x) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, x);
  return std::string(buffer, result.ptr);
}

namespace {

void write_point(std::ostream& out, const Point& p) {
  for (Eigen::Index k = 0; k < p.size(); ++k) out << ',' << format_double(p[k]);
}

void header_coords(std::ostream& out, const char* prefix, Eigen::Index d) {
  for (Eigen::Index k = 1; k <= d; ++k) out << ',' << prefix << k;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << 't';
  header_coords(out, "x_", traj.points.rows());
  out << '\n';
  for (std::size_t n = 0; n < traj.size(); ++n) {
    out << n;
    write_point(out, traj.at(n));
    out << '\n';
  }
}

void write_transition_csv(std::ostream& out, const TransitionMatrix& transition) {
  const auto& p = transition.probabilities;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) out << (j ? "," : "") << format_double(p(i, j));
    out << '\n';
  }
}

TransitionMatrix read_transition_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      double value = 0.0;
      const auto* begin = field.data();
      const auto* end = begin + field.size();
      const auto parsed = std::from_chars(begin, end, value);
      if (parsed.ec != std::errc() || parsed.ptr != end)
        throw PreconditionError("malformed matrix entry '" + field + "'");
      row.push_back(value);
    }
    rows.push_back(std::move(row));
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m == 0) throw PreconditionError("empty transition matrix");
  Eigen::MatrixXd p(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != m)
      throw PreconditionError("transition matrix is not square");
    for (Eigen::Index j = 0; j < m; ++j) p(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return make_transition_matrix(p);
}

json partition_json(const BoxPartition& partition) {
  json cells = json::array();
  for (std::size_t i = 0; i < partition.size(); ++i) {
    const Box& box = partition.cell(i);
    cells.push_back({{"index", i},
                     {"grid", partition.grid_index(i)},
                     {"lower", vector_json(box.lower)},
                     {"upper", vector_json(box.upper)},
                     {"samples", partition.sample_count(i)}});
  }
  return {{"dimension", partition.dimension()},
          {"mesh", partition.mesh()},
          {"origin", vector_json(partition.origin())},
          {"cells", cells}};
}

void write_paths_csv(std::ostream& out, const std::vector<PathSample>& paths) {
  const Eigen::Index d = paths.empty() || paths.front().points.empty()
                             ? 0
                             : paths.front().points.front().size();
  out << "path,n,s";
  header_coords(out, "y_", d);
  out << '\n';
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (std::size_t n = 0; n < paths[p].length(); ++n) {
      out << p << ',' << n << ',' << paths[p].cells[n];
      write_point(out, paths[p].points[n]);
      out << '\n';
    }
  }
}

json stationary_json(const StationaryEstimate& estimate) {
  return {{"samples", estimate.samples.cols()},
          {"cell_marginal", vector_json(estimate.cell_marginal)},
          {"sample_to_cloud", estimate.sample_to_cloud},
          {"cloud_to_sample", estimate.cloud_to_sample}};
}

void write_label_stream_csv(std::ostream& out, const SuspensionDriver& driver,
                            const SectorReadout& readout, const DriverState& start,
                            double separation, std::size_t count) {
  out << "n,t,label,symbol\n";
  for (std::size_t n = 0; n < count; ++n) {
    const double t = separation * static_cast<double>(n);
    const std::uint64_t symbol = driver.symbol(driver.advance(start, t));
    out << n << ',' << format_double(t) << ',' << readout.group(symbol) << ',' << symbol << '\n';
  }
}

void write_orbits_csv(std::ostream& out, const std::vector<Time3Orbit>& orbits) {
  const Eigen::Index d = orbits.empty() || orbits.front().records.empty()
                             ? 0
                             : orbits.front().records.front().fiber.size();
  out << "orbit,n,t,s";
  header_coords(out, "y_", d);
  out << ",branch,crossing\n";
  for (std::size_t o = 0; o < orbits.size(); ++o) {
    for (const auto& r : orbits[o].records) {
      out << o << ',' << r.n << ',' << format_double(r.time) << ',' << r.cell;
      write_point(out, r.fiber);
      out << ',' << r.branch << ',' << (r.crossing ? 1 : 0) << '\n';
    }
  }
}

json network_json(const NetworkSpec& network) {
  json junctions = json::array();
  for (const auto& j : network.junctions) {
    json groups = json::array();
    for (std::size_t g = 0; g < j.branches(); ++g) groups.push_back(j.readout.group_sizes[g]);
    junctions.push_back({{"state", j.state},
                         {"length", kJunctionLength},
                         {"window", {1.0, 1.0 + j.window}},
                         {"targets", j.targets},
                         {"beta", vector_json(j.beta)},
                         {"group_sizes", groups},
                         {"quota_error", j.readout.quota_error()}});
  }
  json pipes = json::array();
  for (std::size_t p = 0; p < network.pipes.size(); ++p)
    pipes.push_back({{"index", p},
                     {"from", network.pipes[p].from},
                     {"to", network.pipes[p].to},
                     {"length", kPipeLength}});
  json gluing = json::array();
  for (const auto& g : network.gluing)
    gluing.push_back({{"junction", g.junction},
                      {"window", g.window},
                      {"pipe", g.pipe},
                      {"target", g.target}});
  const auto& p = network.params;
  return {{"vertices", network.states()},
          {"fiber_dimension", network.fiber_dimension},
          {"driver",
           {{"block_bits", p.block_bits},
            {"ceiling", p.ceiling},
            {"window", p.window},
            {"speed", p.speed},
            {"attraction", p.attraction},
            {"tape_seed", p.tape_seed}}},
          {"junctions", junctions},
          {"pipes", pipes},
          {"gluing", gluing}};
}

void write_cylinders_csv(std::ostream& out, const LawComparison& comparison) {
  out << "word,markov,empirical,deviation,count,given\n";
  for (const auto& row : comparison.rows) {
    for (std::size_t n = 0; n < row.word.size(); ++n) out << (n ? " " : "") << row.word[n];
    out << ',' << format_double(row.markov) << ',' << format_double(row.empirical) << ','
        << format_double(row.deviation) << ',' << row.count << ',' << row.given << '\n';
  }
}

}  // namespace skewflow::io
