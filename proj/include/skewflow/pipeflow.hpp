#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skewflow/core.hpp"
#include "skewflow/driver.hpp"
#include "skewflow/partition.hpp"
#include "skewflow/sample_path.hpp"

namespace skewflow {

/// Driver and switching-window parameters shared by every junction.
struct PipeFlowParams {
  unsigned block_bits = 16;      // L
  double ceiling = 1.0;          // H
  double window = 0.01;          // delta_w, window [1, 1 + delta_w]
  double speed = 1.0;            // T, driver time per unit flow time
  double attraction = 10.0;      // kappa, lateral pull toward the chosen branch
  std::uint64_t tape_seed = 0x7A9E5EEDULL;
};

inline constexpr double kJunctionLength = 2.0;
inline constexpr double kPipeLength = 1.0;
inline constexpr double kSwitchTolerance = 1e-9;

/// k-junction of state j: axial domain [0, 2], switching window
/// [1, 1 + delta_w], branch b at lateral angle 2 pi b / k.
struct JunctionSpec {
  std::size_t state = 0;
  std::vector<std::size_t> targets;
  Eigen::VectorXd beta;
  SectorReadout readout;
  double window = 0.01;
  double speed = 1.0;
  double attraction = 10.0;

  std::size_t branches() const { return targets.size(); }
  double branch_angle(std::size_t b) const;
  std::complex<double> branch_center(std::size_t b) const { return std::polar(1.0, branch_angle(b)); }
};

/// Fiber map on the model fiber [0, 1]^d for the edge from -> to.
using FiberMap = std::function<Point(std::size_t from, std::size_t to, const Point& u)>;

/// Time-1 transport realizing the edge map through its graph and the
/// contraction H(s, x) = (1 - s)(x - c) + c.
struct PipeSpec {
  std::size_t from = 0;
  std::size_t to = 0;
  FiberMap map;
  Point center;

  Point apply(const Point& u) const { return map(from, to, u); }
};

/// One row of the gluing table.
struct GlueEntry {
  std::size_t junction;   // source junction j
  std::size_t window;     // exit window index within j
  std::size_t pipe;       // pipe j -> i
  std::size_t target;     // junction i fed by the pipe's exit face
};

/// Glued network of junctions and pipes with its shared driver.
struct NetworkSpec {
  std::size_t fiber_dimension = 1;
  PipeFlowParams params;
  SuspensionDriver driver{16, 1.0, 0};
  std::vector<JunctionSpec> junctions;
  std::vector<PipeSpec> pipes;
  std::vector<GlueEntry> gluing;
  /// pipe_of[j][b]: pipe attached to exit window b of junction j.
  std::vector<std::vector<std::size_t>> pipe_of;

  std::size_t states() const { return junctions.size(); }
};

/// One junction per state, one pipe per positive entry of P. Throws
/// PreconditionError for a column without positive entries or invalid params.
NetworkSpec build_network(const TransitionMatrix& transition, const FiberMap& maps,
                          std::size_t fiber_dimension, const PipeFlowParams& params);

/// Conjugated cell maps h_i^{-1} o phi_{j->i} o h_j of a system on a partition.
FiberMap model_fiber_maps(const MapSystem& system, const BoxPartition& partition);

/// Exit branch of a lateral kick: the basin of angular width 2 pi / k centered
/// on a branch angle. Empty when |z| or the distance to a basin boundary is
/// below `tolerance`.
std::optional<std::size_t> select_branch(std::complex<double> z, std::size_t branches,
                                         double tolerance = kSwitchTolerance);

/// Lateral kick accumulated over the switching window by a junction entered
/// with driver state `entry`.
WindowAverage junction_kick(const JunctionSpec& junction, const SuspensionDriver& driver,
                            const DriverState& entry);

struct LateralSample {
  double axial;
  std::complex<double> z;
};

struct JunctionOutcome {
  std::size_t branch = 0;
  std::size_t target = 0;
  Point fiber;
  DriverState driver;           // driver state at the exit face
  std::complex<double> kick;
  std::size_t crossings = 0;    // ceiling crossings inside the window
  std::vector<LateralSample> trace;
};

/// Full pass through a junction (flow time 2). `trace_points` > 0 records the
/// lateral coordinate at that many evenly spaced axial positions. Throws
/// IndeterminateSwitch when the kick cannot be resolved.
JunctionOutcome junction_traverse(const JunctionSpec& junction, const SuspensionDriver& driver,
                                  const Point& fiber, const DriverState& entry,
                                  std::size_t trace_points = 0);

/// Lateral coordinate at axial position l of a junction entered with `entry`.
std::complex<double> junction_lateral(const JunctionSpec& junction, const SuspensionDriver& driver,
                                      const DriverState& entry, double axial);

/// Point of a pipe after elapsed time t in [0, 1]. Stage one (t < 1/2) keeps
/// the entry point; from t = 1/2 the point sits on the graph (x, phi(y)) and
/// the first factor contracts to the center, exiting at phi(y).
struct PipePoint {
  double elapsed = 0.0;
  Point base;
  std::optional<Point> image;

  bool at_exit() const { return elapsed >= kPipeLength; }
};

/// Throws DomainError for t outside [0, 1].
PipePoint pipe_traverse(const PipeSpec& pipe, const Point& entry, double t);

enum class ComponentKind { junction, pipe };

/// State of the perturbed pipe-flow in per-component chart coordinates.
/// In a junction `fiber` is the (constant) fiber point; in a pipe it is the
/// entry point and the current position follows from pipe_traverse.
struct PipeFlowState {
  ComponentKind kind = ComponentKind::junction;
  std::size_t component = 0;
  double axial = 0.0;
  std::complex<double> lateral{0.0, 0.0};
  Point fiber;
  DriverState driver;
  DriverState entry_driver;  // driver at the current component's entry face
  double clock = 0.0;
};

/// Junction-entry state at time 0.
PipeFlowState entry_state(const NetworkSpec& network, std::size_t junction, const Point& fiber,
                          const DriverState& driver);

double component_length(ComponentKind kind);

/// Junction exit recorded while flowing.
struct SwitchEvent {
  double clock;
  std::size_t junction;
  std::size_t branch;
  std::size_t target;
  std::size_t crossings;
  std::complex<double> kick;
};

/// Phi^t of the glued network: flow inside the current component, hand off
/// through the gluing table at each exit face. Reaching an exit face exactly
/// lands on the successor's entry face. Throws IndeterminateSwitch.
PipeFlowState global_flow(const NetworkSpec& network, const PipeFlowState& state, double t,
                          std::vector<SwitchEvent>* events = nullptr);

/// Component-local partial semi-flow (stops on the exit face), as an axial flow.
AxialFlow<PipeFlowState> component_axial_flow(const NetworkSpec& network, ComponentKind kind,
                                              std::size_t component);

struct OrbitRecord {
  std::size_t n = 0;
  double time = 0.0;
  std::size_t cell = 0;
  Point fiber;                 // model coordinates
  std::size_t branch = 0;      // exit window used to reach this record
  bool crossing = false;       // that window straddled a ceiling crossing
};

struct Time3Orbit {
  std::vector<OrbitRecord> records;  // records[0] is the start
  bool truncated = false;
  std::string flag;
};

/// Samples the flow at times 3n, n = 0..N, from junction s0 with fiber y0
/// and driver state drawn from `driver_seed`. An indeterminate switch
/// truncates the orbit and sets the flag.
Time3Orbit run_time3_orbit(const NetworkSpec& network, std::uint64_t driver_seed, std::size_t s0,
                           const Point& y0, std::size_t steps);

Time3Orbit run_time3_orbit(const NetworkSpec& network, const DriverState& driver, std::size_t s0,
                           const Point& y0, std::size_t steps);

/// Converts model fibers to ambient points through the partition charts.
PathSample to_path_sample(const Time3Orbit& orbit, const BoxPartition& partition,
                          std::uint64_t seed = 0);

/// Start of one sampled orbit: attractor point x_0, its cell s_0, chart image
/// y_0 and the driver state, all drawn from one stream seeded with `seed`.
struct PipeFlowStart {
  Point ambient;
  std::size_t cell = 0;
  Point fiber;
  DriverState driver;
};

PipeFlowStart pipeflow_start(const NetworkSpec& network, const BoxPartition& partition,
                             const Eigen::MatrixXd& attractor, std::uint64_t seed);

/// Orbits from random attractor starts (s_0, h_{s_0}^{-1}(x_0)); orbit t is
/// started by pipeflow_start with derive_seed(seed, t). points[0] is x_0 itself.
std::vector<PathSample> sample_pipeflow_paths(const NetworkSpec& network,
                                              const BoxPartition& partition,
                                              const Eigen::MatrixXd& attractor, std::size_t count,
                                              std::size_t steps, std::uint64_t seed,
                                              unsigned jobs = 1);

}  // namespace skewflow
