#include "skewflow/pipeflow.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "skewflow/errors.hpp"

namespace skewflow {

namespace {

const UnitWeight& window_weight() {
  static const UnitWeight weight = bump_weight();
  return weight;
}

DriverState window_start(const JunctionSpec& junction, const SuspensionDriver& driver,
                         const DriverState& entry) {
  return driver.advance(entry, junction.speed * 1.0);
}

std::size_t resolve_branch(const JunctionSpec& junction, std::complex<double> kick) {
  auto branch = select_branch(kick, junction.branches());
  if (!branch)
    throw IndeterminateSwitch("indeterminate switch at junction " + std::to_string(junction.state),
                              junction.state);
  return *branch;
}

void check_params(const PipeFlowParams& params) {
  if (params.block_bits == 0 || params.block_bits > 32)
    throw PreconditionError("block length must be in [1, 32]");
  if (!(params.ceiling > 0.0)) throw PreconditionError("ceiling must be positive");
  if (!(params.window > 0.0 && params.window < 1.0))
    throw PreconditionError("switching window must lie in (0, 1)");
  if (!(params.speed > 0.0)) throw PreconditionError("driver speed must be positive");
  if (!(params.attraction >= 0.0)) throw PreconditionError("attraction rate must be >= 0");
}

}  // namespace

double JunctionSpec::branch_angle(std::size_t b) const {
  return 2.0 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(branches());
}

NetworkSpec build_network(const TransitionMatrix& transition, const FiberMap& maps,
                          std::size_t fiber_dimension, const PipeFlowParams& params) {
  check_params(params);
  if (fiber_dimension == 0) throw PreconditionError("fiber dimension must be positive");
  NetworkSpec network;
  network.fiber_dimension = fiber_dimension;
  network.params = params;
  network.driver = SuspensionDriver(params.block_bits, params.ceiling, params.tape_seed);
  const std::size_t m = transition.size();
  network.pipe_of.resize(m);
  const Point center = Point::Constant(static_cast<Eigen::Index>(fiber_dimension), 0.5);

  for (std::size_t j = 0; j < m; ++j) {
    JunctionSpec junction;
    junction.state = j;
    junction.targets = transition.successors(j);
    if (junction.targets.empty())
      throw PreconditionError("column " + std::to_string(j) + " has no positive entry");
    junction.beta.resize(static_cast<Eigen::Index>(junction.targets.size()));
    for (std::size_t b = 0; b < junction.targets.size(); ++b)
      junction.beta[static_cast<Eigen::Index>(b)] = transition(junction.targets[b], j);
    junction.readout = assign_groups(junction.beta, params.block_bits);
    junction.window = params.window;
    junction.speed = params.speed;
    junction.attraction = params.attraction;

    for (std::size_t b = 0; b < junction.targets.size(); ++b) {
      const std::size_t pipe = network.pipes.size();
      network.pipes.push_back({j, junction.targets[b], maps, center});
      network.gluing.push_back({j, b, pipe, junction.targets[b]});
      network.pipe_of[j].push_back(pipe);
    }
    network.junctions.push_back(std::move(junction));
  }
  return network;
}

FiberMap model_fiber_maps(const MapSystem& system, const BoxPartition& partition) {
  auto shared_system = std::make_shared<const MapSystem>(system);
  auto shared_partition = std::make_shared<const BoxPartition>(partition);
  return [shared_system, shared_partition](std::size_t from, std::size_t to, const Point& u) {
    return model_cell_map(from, to, u, *shared_system, *shared_partition);
  };
}

std::optional<std::size_t> select_branch(std::complex<double> z, std::size_t branches,
                                         double tolerance) {
  if (branches == 0) throw PreconditionError("junction without branches");
  if (branches == 1) return 0;
  if (std::abs(z) < tolerance) return std::nullopt;
  const double width = 2.0 * std::numbers::pi / static_cast<double>(branches);
  double angle = std::arg(z);
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  const double shifted = angle + 0.5 * width;
  const double sector = std::floor(shifted / width);
  const double offset = shifted - sector * width;
  if (std::min(offset, width - offset) < tolerance) return std::nullopt;
  return static_cast<std::size_t>(sector) % branches;
}

WindowAverage junction_kick(const JunctionSpec& junction, const SuspensionDriver& driver,
                            const DriverState& entry) {
  return zeta_bar(driver, junction.readout, window_start(junction, driver, entry),
                  junction.speed * junction.window, window_weight());
}

std::complex<double> junction_lateral(const JunctionSpec& junction, const SuspensionDriver& driver,
                                      const DriverState& entry, double axial) {
  if (axial <= 1.0) return {0.0, 0.0};
  const double window_end = 1.0 + junction.window;
  if (axial < window_end)
    return zeta_bar_partial(driver, junction.readout, window_start(junction, driver, entry),
                            junction.speed * junction.window, window_weight(),
                            (axial - 1.0) / junction.window)
        .value;
  const std::complex<double> kick = junction_kick(junction, driver, entry).value;
  const std::complex<double> center = junction.branch_center(resolve_branch(junction, kick));
  return center + (kick - center) * std::exp(-junction.attraction * (axial - window_end));
}

JunctionOutcome junction_traverse(const JunctionSpec& junction, const SuspensionDriver& driver,
                                  const Point& fiber, const DriverState& entry,
                                  std::size_t trace_points) {
  const WindowAverage kick = junction_kick(junction, driver, entry);
  JunctionOutcome out;
  out.branch = resolve_branch(junction, kick.value);
  out.target = junction.targets[out.branch];
  out.fiber = fiber;
  out.driver = driver.advance(entry, junction.speed * kJunctionLength);
  out.kick = kick.value;
  out.crossings = kick.crossings;
  for (std::size_t p = 0; p < trace_points; ++p) {
    const double axial = trace_points == 1
                             ? kJunctionLength
                             : kJunctionLength * static_cast<double>(p) /
                                   static_cast<double>(trace_points - 1);
    out.trace.push_back({axial, junction_lateral(junction, driver, entry, axial)});
  }
  return out;
}

PipePoint pipe_traverse(const PipeSpec& pipe, const Point& entry, double t) {
  if (!(t >= 0.0 && t <= kPipeLength)) throw DomainError("pipe time outside [0, 1]");
  PipePoint point;
  point.elapsed = t;
  if (t < 0.5) {
    point.base = entry;
    return point;
  }
  const double s = 2.0 * t - 1.0;
  point.base = ((1.0 - s) * (entry - pipe.center)) + pipe.center;
  point.image = pipe.apply(entry);
  return point;
}

PipeFlowState entry_state(const NetworkSpec& network, std::size_t junction, const Point& fiber,
                          const DriverState& driver) {
  if (junction >= network.states()) throw PreconditionError("junction index out of range");
  PipeFlowState state;
  state.kind = ComponentKind::junction;
  state.component = junction;
  state.fiber = fiber;
  state.driver = driver;
  state.entry_driver = driver;
  return state;
}

double component_length(ComponentKind kind) {
  return kind == ComponentKind::junction ? kJunctionLength : kPipeLength;
}

namespace {

// Fills the fields that follow from (component, entry driver, axial).
void settle(const NetworkSpec& network, PipeFlowState& state) {
  state.driver = network.driver.advance(state.entry_driver, network.params.speed * state.axial);
  state.lateral = state.kind == ComponentKind::junction
                      ? junction_lateral(network.junctions[state.component], network.driver,
                                         state.entry_driver, state.axial)
                      : std::complex<double>{0.0, 0.0};
}

}  // namespace

PipeFlowState global_flow(const NetworkSpec& network, const PipeFlowState& state, double t,
                          std::vector<SwitchEvent>* events) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw PreconditionError("flow time must be >= 0");
  PipeFlowState s = state;
  double left = t;
  for (;;) {
    const double length = component_length(s.kind);
    const double remaining = length - s.axial;
    if (left < remaining) {
      s.axial += left;
      s.clock += left;
      break;
    }
    left -= remaining;
    s.clock += remaining;
    const DriverState exit_driver =
        network.driver.advance(s.entry_driver, network.params.speed * length);
    if (s.kind == ComponentKind::junction) {
      const JunctionSpec& junction = network.junctions[s.component];
      const WindowAverage kick = junction_kick(junction, network.driver, s.entry_driver);
      const std::size_t branch = resolve_branch(junction, kick.value);
      if (events)
        events->push_back({s.clock, s.component, branch, junction.targets[branch], kick.crossings,
                           kick.value});
      s.kind = ComponentKind::pipe;
      s.component = network.pipe_of[s.component][branch];
    } else {
      const PipeSpec& pipe = network.pipes[s.component];
      s.fiber = pipe.apply(s.fiber);
      s.kind = ComponentKind::junction;
      s.component = pipe.to;
    }
    s.entry_driver = exit_driver;
    s.axial = 0.0;
  }
  settle(network, s);
  return s;
}

AxialFlow<PipeFlowState> component_axial_flow(const NetworkSpec& network, ComponentKind kind,
                                              std::size_t component) {
  const double length = component_length(kind);
  AxialFlow<PipeFlowState> axial;
  axial.length = length;
  axial.projection = [](const PipeFlowState& x) { return x.axial; };
  axial.partial.exit_time = [length](const PipeFlowState& x) { return length - x.axial; };
  axial.partial.flow = [&network, length](const PipeFlowState& x, double s) {
    if (!(s >= 0.0)) throw PreconditionError("flow time must be >= 0");
    if (s > length - x.axial + 1e-12) throw ExitTimeExceeded("flow past the component's exit face");
    PipeFlowState y = x;
    y.axial = std::min(length, x.axial + s);
    y.clock += s;
    settle(network, y);
    return y;
  };
  axial.partial.tag = kind == ComponentKind::junction
                          ? "junction " + std::to_string(component)
                          : "pipe " + std::to_string(network.pipes.at(component).from) + "->" +
                                std::to_string(network.pipes.at(component).to);
  return axial;
}

Time3Orbit run_time3_orbit(const NetworkSpec& network, std::uint64_t driver_seed, std::size_t s0,
                           const Point& y0, std::size_t steps) {
  Stream rng(driver_seed);
  return run_time3_orbit(network, network.driver.random_state(rng), s0, y0, steps);
}

Time3Orbit run_time3_orbit(const NetworkSpec& network, const DriverState& driver, std::size_t s0,
                           const Point& y0, std::size_t steps) {
  if (y0.size() != static_cast<Eigen::Index>(network.fiber_dimension) ||
      (y0.array() < 0.0).any() || (y0.array() > 1.0).any())
    throw DomainError("start fiber point outside the model fiber");
  Time3Orbit orbit;
  orbit.records.reserve(steps + 1);
  PipeFlowState state = entry_state(network, s0, y0, driver);
  orbit.records.push_back({0, 0.0, s0, y0, 0, false});
  std::vector<SwitchEvent> events;
  for (std::size_t n = 1; n <= steps; ++n) {
    events.clear();
    try {
      state = global_flow(network, state, 3.0, &events);
    } catch (const IndeterminateSwitch& e) {
      orbit.truncated = true;
      orbit.flag = std::string(e.what()) + " at step " + std::to_string(n);
      break;
    }
    const SwitchEvent& last = events.back();
    orbit.records.push_back({n, state.clock, state.component, state.fiber, last.branch,
                             last.crossings > 0});
  }
  return orbit;
}

PathSample to_path_sample(const Time3Orbit& orbit, const BoxPartition& partition,
                          std::uint64_t seed) {
  PathSample path;
  path.source = PathSource::pipeflow;
  path.seed = seed;
  path.truncated = orbit.truncated;
  path.cells.reserve(orbit.records.size());
  path.points.reserve(orbit.records.size());
  for (const auto& record : orbit.records) {
    path.cells.push_back(record.cell);
    path.points.push_back(make_chart(partition, record.cell).to_cell(record.fiber));
  }
  return path;
}

PipeFlowStart pipeflow_start(const NetworkSpec& network, const BoxPartition& partition,
                             const Eigen::MatrixXd& attractor, std::uint64_t seed) {
  if (attractor.cols() == 0) throw PreconditionError("pipe-flow starts need attractor samples");
  Stream rng(seed);
  PipeFlowStart start;
  const auto n = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(attractor.cols())));
  start.ambient = attractor.col(n);
  const auto cell = partition.locate(start.ambient);
  if (!cell) throw PreconditionError("attractor sample outside all cells");
  start.cell = *cell;
  start.fiber = make_chart(partition, *cell).to_model(start.ambient).cwiseMax(0.0).cwiseMin(1.0);
  start.driver = network.driver.random_state(rng);
  return start;
}

std::vector<PathSample> sample_pipeflow_paths(const NetworkSpec& network,
                                              const BoxPartition& partition,
                                              const Eigen::MatrixXd& attractor, std::size_t count,
                                              std::size_t steps, std::uint64_t seed,
                                              unsigned jobs) {
  if (attractor.cols() == 0) throw PreconditionError("pipe-flow starts need attractor samples");
  std::vector<PathSample> paths(count);
  parallel_for(count, jobs, [&](std::size_t t) {
    const std::uint64_t path_seed = derive_seed(seed, t);
    const PipeFlowStart start = pipeflow_start(network, partition, attractor, path_seed);
    paths[t] = to_path_sample(run_time3_orbit(network, start.driver, start.cell, start.fiber, steps),
                              partition, path_seed);
    paths[t].points.front() = start.ambient;
  });
  return paths;
}

}  // namespace skewflow
