#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewflow/core.hpp"
#include "skewflow/driver.hpp"
#include "skewflow/partition.hpp"
#include "skewflow/paths.hpp"
#include "skewflow/pipeflow.hpp"
#include "skewflow/sample_path.hpp"
#include "skewflow/stepskew.hpp"

namespace skewflow::io {

using json = nlohmann::json;

/// Shortest text that reads back to the same double.
std::string format_double(double x);

/// Columns t, x_1..x_d.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

/// Row i, column j holds P(i, j).
void write_transition_csv(std::ostream& out, const TransitionMatrix& transition);
/// Reads the format above and validates column sums. Throws PreconditionError.
TransitionMatrix read_transition_csv(std::istream& in);

json partition_json(const BoxPartition& partition);

/// Columns path, n, s, y_1..y_d.
void write_paths_csv(std::ostream& out, const std::vector<PathSample>& paths);

json stationary_json(const StationaryEstimate& estimate);

/// Columns n, t, label, symbol: block-symbol group read at times t = n * separation.
void write_label_stream_csv(std::ostream& out, const SuspensionDriver& driver,
                            const SectorReadout& readout, const DriverState& start,
                            double separation, std::size_t count);

/// Columns orbit, n, t, s, y_1..y_d, branch, crossing (model fiber coordinates).
void write_orbits_csv(std::ostream& out, const std::vector<Time3Orbit>& orbits);

json network_json(const NetworkSpec& network);

/// Columns word, markov, empirical, deviation, count, given. Words are
/// space separated cell indices.
void write_cylinders_csv(std::ostream& out, const LawComparison& comparison);

}  // namespace skewflow::io
