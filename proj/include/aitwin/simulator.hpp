#pragma once

// Discrete-time water-tank process used as the running example: tanks with
// Torricelli outflow, valves with flow sensors, one pump-driven source, and
// injectable component faults. Explicit Euler on tank heads.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aitwin/component.hpp"
#include "aitwin/data_model.hpp"

namespace aitwin::sim {

enum class Config { ATank, ThreeTanks, FourTanks };

std::string_view configName(Config c) noexcept;
std::optional<Config> parseConfig(std::string_view name) noexcept;

enum class FaultMode { ValveBlock, ValveStuck, TankLeak, PipeJam, PumpSlow, PumpFast };

std::string_view faultModeName(FaultMode m) noexcept;
std::optional<FaultMode> parseFaultMode(std::string_view name) noexcept;
/// Magnitude used when a mode is activated without one (e.g. through setFailedComps).
double defaultMagnitude(FaultMode m) noexcept;

struct TankSpec {
  std::string id;
  double area = 1.0;  // m^2
  double hMax = 2.0;  // m
};

struct ValveSpec {
  std::string id;
  std::optional<std::size_t> from;  // tank index; nullopt = pump-fed source
  std::optional<std::size_t> to;    // tank index; nullopt = sink
  double k = 0.0;                   // m^2.5/s for tank-fed valves
  double opening = 1.0;             // commanded opening u in [0, 1]
};

struct Topology {
  std::vector<TankSpec> tanks;
  std::vector<ValveSpec> valves;
  double sourceFlow = 0.0;  // m^3/s at full opening of a source valve
  std::string pumpId = "pump";

  /// Throws InvalidScenario when references dangle or parameters are non-positive.
  void validate() const;

  std::size_t flowSignal(std::size_t valve) const noexcept { return valve; }
  std::size_t levelSignal(std::size_t tank) const noexcept { return valves.size() + tank; }
  std::optional<std::size_t> tankIndex(std::string_view id) const noexcept;
  std::optional<std::size_t> valveIndex(std::string_view id) const noexcept;

  /// Tanks ordered so that every valve goes from an earlier to a later tank.
  std::vector<std::size_t> topologicalOrder() const;

  /// Flow signals `<valve>_flow` first, then `<tank>_level`.
  SignalSchema schema() const;
  /// Tanks, valves, then the pump.
  std::vector<Component> components() const;
};

/// Fixture topologies. Parameters are repo fixtures; see README.
Topology makeTopology(Config config);

struct Fault {
  std::string component;
  FaultMode mode = FaultMode::ValveBlock;
  Timestamp onset = 0.0;
  double magnitude = 1.0;
};

/// Changes a valve's commanded opening from `at` onwards.
struct OpeningCommand {
  std::string valve;
  Timestamp at = 0.0;
  double opening = 1.0;
};

enum class InitialLevels { Steady, Empty };

struct Scenario {
  Config config = Config::FourTanks;
  std::vector<Fault> faults;
  std::vector<OpeningCommand> commands;
  double dt = 1.0;
  double duration = 600.0;
  /// Per-signal noise sigma as a fraction of the fault-free steady-state magnitude.
  double noiseSigma = 0.01;
  std::uint64_t seed = 0;
  std::string backend = "knn-kde";
  InitialLevels initial = InitialLevels::Steady;
};

struct SimState {
  Timestamp t = 0.0;
  std::vector<double> levels;  // per tank, m
  std::vector<double> flows;   // per valve, m^3/s, the flows acting over [t, t + dt)
};

/// Boundary fluxes of one Euler step (m^3/s), for the mass-balance invariant.
struct StepFluxes {
  double sourceIn = 0.0;
  double sinkOut = 0.0;
  double leaks = 0.0;
  double spill = 0.0;
};

/// Process model = topology + fault list + opening schedule. Stateless; every
/// query is a pure function of its arguments.
class Plant {
 public:
  Plant(Topology topo, std::vector<Fault> faults, std::vector<OpeningCommand> commands = {});

  const Topology& topology() const noexcept { return topo_; }
  std::span<const Fault> faults() const noexcept { return faults_; }

  /// Effective opening of valve j at time t (commands, block, stuck applied).
  double opening(std::size_t valve, Timestamp t) const;
  double effectiveK(std::size_t valve, Timestamp t) const;
  double leakCoefficient(std::size_t tank, Timestamp t) const;
  double pumpFactor(Timestamp t) const;

  /// Valve flows for the given heads, limited so no tank drains below zero within dt.
  std::vector<double> flows(std::span<const double> levels, Timestamp t, double dt) const;
  double leakFlow(std::size_t tank, std::span<const double> levels, Timestamp t, double dt) const;

  SimState initialState(std::span<const double> levels, Timestamp t, double dt) const;
  /// One explicit Euler step of length dt; fills `fluxes` when given. The
  /// successor is stamped nextT (default s.t + dt).
  SimState step(const SimState& s, double dt, StepFluxes* fluxes = nullptr,
                std::optional<Timestamp> nextT = std::nullopt) const;

  /// Analytic steady state with every fault active (and the source flow
  /// overridden when given). Returns heads; flows via flows().
  std::vector<double> steadyLevels(std::optional<double> sourceFlowOverride = std::nullopt) const;

 private:
  double commanded(std::size_t valve, Timestamp t) const;
  bool active(const Fault& f, Timestamp t) const noexcept;

  Topology topo_;
  std::vector<Fault> faults_;
  std::vector<OpeningCommand> commands_;
};

/// Signal vector of a state: flows then levels.
std::vector<double> observe(const SimState& s);

struct BuiltScenario {
  Topology topology;
  SignalSchema schema;
  std::vector<Component> components;
};

/// Validates the scenario and instantiates its topology. Throws InvalidScenario.
BuiltScenario buildScenario(const Scenario& sc);

struct Label {
  Timestamp t = 0.0;
  bool anomalous = false;
  std::string label;  // fault mode name or "stable"
};

struct RunResult {
  DataStore data;
  std::vector<Label> labels;
  std::vector<SimState> states;     // noise-free internal states, one per sample
  std::vector<StepFluxes> fluxes;   // fluxes[k] acts between states[k] and states[k + 1]
};

/// Samples at t = k*dt for k = 0 .. duration/dt - 1; seeded Gaussian noise on
/// emitted signals only.
RunResult runDetailed(const Scenario& sc);
DataStore run(const Scenario& sc);

/// Relative residual of the discrete mass balance for one step.
double massBalanceResidual(const Topology& topo, const SimState& before, const SimState& after,
                           const StepFluxes& fluxes, double dt);

// Scenario text format: `key = value` lines, `#` comments. Keys: config, dt,
// duration, noise_sigma, seed, backend, initial (steady|empty), and repeatable
// `fault = <component> <mode> <onset> [magnitude]`,
// `command = <valve> <at> <opening>`.
Scenario parseScenario(std::istream& in);
Scenario loadScenarioFile(const std::string& path);
std::string formatScenario(const Scenario& sc);

void saveLabelsCsv(std::span<const Label> labels, std::ostream& out);
std::vector<Label> loadLabelsCsv(std::istream& in);

}  // namespace aitwin::sim
