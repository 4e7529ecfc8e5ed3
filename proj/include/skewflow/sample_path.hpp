#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skewflow/core.hpp"

namespace skewflow {

enum class PathSource { stepskew, pipeflow };

inline std::string to_string(PathSource source) {
  return source == PathSource::stepskew ? "stepskew" : "pipeflow";
}

/// Finite path (s_0, y_0), ..., (s_N, y_N) with y_n in ambient coordinates.
struct PathSample {
  PathSource source = PathSource::stepskew;
  std::uint64_t seed = 0;
  std::vector<std::size_t> cells;
  std::vector<Point> points;
  /// clamped[n] is set when the step into index n + 1 was clamped.
  std::vector<bool> clamped;
  /// Set when generation stopped early (indeterminate junction switch).
  bool truncated = false;

  std::size_t length() const { return cells.size(); }
};

}  // namespace skewflow
