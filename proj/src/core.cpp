#include "skewflow/core.hpp"

#include <sstream>

#include "skewflow/errors.hpp"

namespace skewflow {
namespace {

double wrap_unit(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

Box unit_box(std::size_t d) {
  return Box{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)),
             Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d))};
}

Point uniform_in(const Box& box, Stream& rng) {
  Point p(box.dimension());
  for (Eigen::Index k = 0; k < p.size(); ++k)
    p[k] = box.lower[k] + rng.uniform() * (box.upper[k] - box.lower[k]);
  return p;
}

}  // namespace

MapSystem doubling_map() {
  MapSystem s;
  s.name = "doubling";
  s.dimension = 1;
  s.domain = unit_box(1);
  s.map = [](const Point& x) { return Point::Constant(1, wrap_unit(2.0 * x[0])); };
  s.start = [box = s.domain](Stream& rng) { return uniform_in(box, rng); };
  s.orbit_sampler = doubling_tape_orbit;
  return s;
}

MapSystem rotation_map(double alpha) {
  MapSystem s;
  s.name = "rotation";
  s.dimension = 1;
  s.domain = unit_box(1);
  s.parameters["alpha"] = alpha;
  s.map = [alpha](const Point& x) { return Point::Constant(1, wrap_unit(x[0] + alpha)); };
  s.start = [box = s.domain](Stream& rng) { return uniform_in(box, rng); };
  return s;
}

MapSystem logistic_map(double a) {
  MapSystem s;
  s.name = "logistic";
  s.dimension = 1;
  s.domain = unit_box(1);
  s.parameters["a"] = a;
  s.map = [a](const Point& x) { return Point::Constant(1, a * x[0] * (1.0 - x[0])); };
  s.start = [](Stream& rng) { return Point::Constant(1, 0.05 + 0.9 * rng.uniform()); };
  s.burn_in = 100;
  return s;
}

MapSystem henon_map(double a, double b) {
  MapSystem s;
  s.name = "henon";
  s.dimension = 2;
  s.domain = Box{Eigen::Vector2d(-1.8, -0.5), Eigen::Vector2d(1.8, 0.5)};
  s.parameters["a"] = a;
  s.parameters["b"] = b;
  s.map = [a, b](const Point& x) {
    return Point(Eigen::Vector2d(1.0 - a * x[0] * x[0] + x[1], b * x[0]));
  };
  s.start = [](Stream& rng) {
    return Point(Eigen::Vector2d(0.1 * rng.uniform(), 0.1 * rng.uniform()));
  };
  s.burn_in = 1000;
  return s;
}

MapSystem identity_map(std::size_t dimension) {
  MapSystem s;
  s.name = "identity";
  s.dimension = dimension;
  s.domain = unit_box(dimension);
  s.map = [](const Point& x) { return x; };
  s.start = [box = s.domain](Stream& rng) { return uniform_in(box, rng); };
  return s;
}

MapSystem make_system(const std::string& name, const std::map<std::string, double>& parameters) {
  auto get = [&](const char* key, double fallback) {
    auto it = parameters.find(key);
    return it == parameters.end() ? fallback : it->second;
  };
  auto allow_only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : parameters) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown parameter '" + key + "' for system " + name);
    }
  };
  if (name == "doubling") {
    allow_only({});
    return doubling_map();
  }
  if (name == "rotation") {
    allow_only({"alpha"});
    return rotation_map(get("alpha", (std::sqrt(5.0) - 1.0) / 2.0));
  }
  if (name == "logistic") {
    allow_only({"a"});
    return logistic_map(get("a", 4.0));
  }
  if (name == "henon") {
    allow_only({"a", "b"});
    return henon_map(get("a", 1.4), get("b", 0.3));
  }
  if (name == "identity") {
    allow_only({"dimension"});
    return identity_map(static_cast<std::size_t>(get("dimension", 1.0)));
  }
  throw ConfigError("unknown system '" + name + "'");
}

Trajectory iterate_map(const MapSystem& system, const Point& x0, std::size_t steps) {
  if (static_cast<std::size_t>(x0.size()) != system.dimension || !system.domain.contains(x0)) {
    std::ostringstream msg;
    msg << "start point outside the domain box of " << system.name;
    throw DomainError(msg.str());
  }
  Trajectory traj;
  traj.points.resize(x0.size(), static_cast<Eigen::Index>(steps + 1));
  traj.points.col(0) = x0;
  Point x = x0;
  for (std::size_t n = 1; n <= steps; ++n) {
    x = system.map(x);
    traj.points.col(static_cast<Eigen::Index>(n)) = x;
  }
  return traj;
}

Trajectory attractor_orbit(const MapSystem& system, std::size_t steps, std::uint64_t seed) {
  if (system.orbit_sampler) return system.orbit_sampler(steps, seed);
  Stream rng(seed);
  Point x = system.start ? system.start(rng) : system.domain.lower;
  for (std::size_t n = 0; n < system.burn_in; ++n) x = system.map(x);
  return iterate_map(system, x, steps);
}

Trajectory doubling_tape_orbit(std::size_t steps, std::uint64_t seed) {
  constexpr std::uint64_t kMask = (std::uint64_t{1} << 53) - 1;
  Stream rng(seed);
  std::uint64_t window = rng.next_u64() >> 11;
  std::uint64_t buffer = 0;
  int available = 0;
  Trajectory traj;
  traj.points.resize(1, static_cast<Eigen::Index>(steps + 1));
  for (std::size_t n = 0; n <= steps; ++n) {
    traj.points(0, static_cast<Eigen::Index>(n)) = static_cast<double>(window) * 0x1.0p-53;
    if (available == 0) {
      buffer = rng.next_u64();
      available = 64;
    }
    window = ((window << 1) & kMask) | (buffer & 1u);
    buffer >>= 1;
    --available;
  }
  return traj;
}

IntervalFlowResult uniform_interval_flow(double l, double s, double length) {
  if (!(length > 0.0) || l < 0.0 || l > length || s < 0.0)
    throw DomainError("interval flow requires 0 <= l <= L and s >= 0");
  if (s > length - l) throw ExitTimeExceeded("duration exceeds the exit time L - l");
  const double moved = l + s;
  return {moved, length - moved};
}

AxialFlow<double> uniform_interval_axial_flow(double length) {
  AxialFlow<double> axial;
  axial.length = length;
  axial.projection = [](const double& l) { return l; };
  axial.partial.tag = "uniform-interval";
  axial.partial.exit_time = [length](const double& l) { return length - l; };
  axial.partial.flow = [length](const double& l, double s) { return std::min(l + s, length); };
  return axial;
}

}  // namespace skewflow
