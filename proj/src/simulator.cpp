#include "aitwin/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "aitwin/error.hpp"
#include "text_util.hpp"

namespace aitwin::sim {

namespace {

constexpr double kOnsetEpsilon = 1e-9;

TankSpec tank(std::string id) { return {std::move(id), 1.0, 2.0}; }

ValveSpec valve(std::string id, std::optional<std::size_t> from, std::optional<std::size_t> to, double k) {
  return {std::move(id), from, to, k, 1.0};
}

[[noreturn]] void invalid(const std::string& what) { throw TwinError(Errc::InvalidScenario, what); }

}  // namespace

std::string_view configName(Config c) noexcept {
  switch (c) {
    case Config::ATank: return "a_tank";
    case Config::ThreeTanks: return "3_tanks";
    case Config::FourTanks: return "4_tanks";
  }
  return "unknown";
}

std::optional<Config> parseConfig(std::string_view name) noexcept {
  for (auto c : {Config::ATank, Config::ThreeTanks, Config::FourTanks})
    if (configName(c) == name) return c;
  return std::nullopt;
}

std::string_view faultModeName(FaultMode m) noexcept {
  switch (m) {
    case FaultMode::ValveBlock: return "valveBlock";
    case FaultMode::ValveStuck: return "valveStuck";
    case FaultMode::TankLeak: return "tankLeak";
    case FaultMode::PipeJam: return "pipeJam";
    case FaultMode::PumpSlow: return "pumpSlow";
    case FaultMode::PumpFast: return "pumpFast";
  }
  return "unknown";
}

std::optional<FaultMode> parseFaultMode(std::string_view name) noexcept {
  for (auto m : {FaultMode::ValveBlock, FaultMode::ValveStuck, FaultMode::TankLeak, FaultMode::PipeJam,
                 FaultMode::PumpSlow, FaultMode::PumpFast})
    if (faultModeName(m) == name) return m;
  return std::nullopt;
}

double defaultMagnitude(FaultMode m) noexcept {
  switch (m) {
    case FaultMode::ValveBlock: return 1.0;
    case FaultMode::ValveStuck: return 1.0;  // stuck at the onset opening
    case FaultMode::TankLeak: return 0.02;   // leak coefficient, m^2.5/s
    case FaultMode::PipeJam: return 0.3;     // remaining fraction of k
    case FaultMode::PumpSlow: return 0.5;
    case FaultMode::PumpFast: return 1.2;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Topology

std::optional<std::size_t> Topology::tankIndex(std::string_view id) const noexcept {
  for (std::size_t i = 0; i < tanks.size(); ++i)
    if (tanks[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> Topology::valveIndex(std::string_view id) const noexcept {
  for (std::size_t i = 0; i < valves.size(); ++i)
    if (valves[i].id == id) return i;
  return std::nullopt;
}

void Topology::validate() const {
  std::set<std::string, std::less<>> ids{pumpId};
  for (const auto& t : tanks) {
    if (!ids.insert(t.id).second) invalid("duplicate id '" + t.id + "'");
    if (!(t.area > 0.0) || !(t.hMax > 0.0)) invalid("tank '" + t.id + "' needs positive area and hMax");
  }
  for (const auto& v : valves) {
    if (!ids.insert(v.id).second) invalid("duplicate id '" + v.id + "'");
    if ((v.from && *v.from >= tanks.size()) || (v.to && *v.to >= tanks.size()))
      invalid("valve '" + v.id + "' references a missing tank");
    if (v.from && !(v.k > 0.0)) invalid("valve '" + v.id + "' needs k > 0");
    if (!(v.opening >= 0.0 && v.opening <= 1.0)) invalid("valve '" + v.id + "' opening outside [0,1]");
  }
  if (!(sourceFlow >= 0.0)) invalid("negative source flow");
  (void)topologicalOrder();
}

std::vector<std::size_t> Topology::topologicalOrder() const {
  std::vector<std::size_t> indegree(tanks.size(), 0);
  for (const auto& v : valves)
    if (v.from && v.to) ++indegree[*v.to];
  std::vector<std::size_t> order;
  std::vector<bool> done(tanks.size(), false);
  while (order.size() < tanks.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < tanks.size(); ++i) {
      if (done[i] || indegree[i] != 0) continue;
      done[i] = true;
      order.push_back(i);
      progressed = true;
      for (const auto& v : valves)
        if (v.from == i && v.to) --indegree[*v.to];
    }
    if (!progressed) invalid("tank network contains a cycle");
  }
  return order;
}

SignalSchema Topology::schema() const {
  std::vector<SignalInfo> infos;
  for (const auto& v : valves) infos.push_back({0, v.id + "_flow", "m3/s"});
  for (const auto& t : tanks) infos.push_back({0, t.id + "_level", "m"});
  return SignalSchema(std::move(infos));
}

std::vector<Component> Topology::components() const {
  std::vector<Component> out;
  for (const auto& t : tanks) out.push_back({t.id, ComponentKind::Tank, defaultModes(ComponentKind::Tank)});
  for (const auto& v : valves) out.push_back({v.id, ComponentKind::Valve, defaultModes(ComponentKind::Valve)});
  out.push_back({pumpId, ComponentKind::Pump, defaultModes(ComponentKind::Pump)});
  return out;
}

Topology makeTopology(Config config) {
  Topology topo;
  topo.sourceFlow = 0.1;
  switch (config) {
    case Config::ATank:
      topo.tanks = {tank("t1")};
      topo.valves = {valve("v0", std::nullopt, 0, 0.0), valve("v1", 0, std::nullopt, 0.1)};
      break;
    case Config::ThreeTanks:
      topo.tanks = {tank("t1"), tank("t2"), tank("t3")};
      topo.valves = {valve("v0", std::nullopt, 0, 0.0), valve("v1", 0, 1, 0.09), valve("v2", 1, 2, 0.1),
                     valve("v3", 2, std::nullopt, 0.11)};
      break;
    case Config::FourTanks:
      // v1..v3 are the three equal pipes out of t0; t1 and t2 drain into t3.
      topo.tanks = {tank("t0"), tank("t1"), tank("t2"), tank("t3")};
      topo.valves = {valve("v0", std::nullopt, 0, 0.0), valve("v1", 0, 1, 0.04),         valve("v2", 0, 2, 0.04),
                     valve("v3", 0, 3, 0.04),           valve("v4", 1, 3, 0.035),        valve("v5", 2, 3, 0.04),
                     valve("v6", 3, std::nullopt, 0.1)};
      break;
  }
  return topo;
}

// ---------------------------------------------------------------------------
// Plant

Plant::Plant(Topology topo, std::vector<Fault> faults, std::vector<OpeningCommand> commands)
    : topo_(std::move(topo)), faults_(std::move(faults)), commands_(std::move(commands)) {
  std::stable_sort(commands_.begin(), commands_.end(),
                   [](const OpeningCommand& a, const OpeningCommand& b) { return a.at < b.at; });
}

bool Plant::active(const Fault& f, Timestamp t) const noexcept { return t >= f.onset - kOnsetEpsilon; }

double Plant::commanded(std::size_t j, Timestamp t) const {
  double u = topo_.valves[j].opening;
  for (const auto& c : commands_) {
    if (c.at > t + kOnsetEpsilon) break;
    if (c.valve == topo_.valves[j].id) u = c.opening;
  }
  return u;
}

double Plant::opening(std::size_t j, Timestamp t) const {
  const auto& id = topo_.valves[j].id;
  double u = commanded(j, t);
  for (const auto& f : faults_) {
    if (f.component != id || !active(f, t)) continue;
    if (f.mode == FaultMode::ValveBlock) return 0.0;
    if (f.mode == FaultMode::ValveStuck) u = f.magnitude * commanded(j, f.onset);
  }
  return std::clamp(u, 0.0, 1.0);
}

double Plant::effectiveK(std::size_t j, Timestamp t) const {
  double k = topo_.valves[j].k;
  for (const auto& f : faults_)
    if (f.mode == FaultMode::PipeJam && f.component == topo_.valves[j].id && active(f, t)) k *= f.magnitude;
  return k;
}

double Plant::leakCoefficient(std::size_t i, Timestamp t) const {
  double kl = 0.0;
  for (const auto& f : faults_)
    if (f.mode == FaultMode::TankLeak && f.component == topo_.tanks[i].id && active(f, t)) kl += f.magnitude;
  return kl;
}

double Plant::pumpFactor(Timestamp t) const {
  double m = 1.0;
  for (const auto& f : faults_)
    if ((f.mode == FaultMode::PumpSlow || f.mode == FaultMode::PumpFast) && f.component == topo_.pumpId &&
        active(f, t))
      m *= f.magnitude;
  return m;
}

namespace {

// Fraction of the requested outflow a tank can deliver within dt.
double drainScale(double area, double level, double requested, double dt) {
  const double available = area * std::max(level, 0.0);
  const double wanted = requested * dt;
  return wanted > available ? available / wanted : 1.0;
}

}  // namespace

std::vector<double> Plant::flows(std::span<const double> levels, Timestamp t, double dt) const {
  const auto& valves = topo_.valves;
  std::vector<double> q(valves.size(), 0.0);
  for (std::size_t j = 0; j < valves.size(); ++j) {
    const double u = opening(j, t);
    if (!valves[j].from)
      q[j] = topo_.sourceFlow * pumpFactor(t) * u;
    else
      q[j] = u * effectiveK(j, t) * std::sqrt(std::max(levels[*valves[j].from], 0.0));
  }
  for (std::size_t i = 0; i < topo_.tanks.size(); ++i) {
    double requested = leakCoefficient(i, t) * std::sqrt(std::max(levels[i], 0.0));
    for (std::size_t j = 0; j < valves.size(); ++j)
      if (valves[j].from == i) requested += q[j];
    const double s = drainScale(topo_.tanks[i].area, levels[i], requested, dt);
    if (s < 1.0)
      for (std::size_t j = 0; j < valves.size(); ++j)
        if (valves[j].from == i) q[j] *= s;
  }
  return q;
}

double Plant::leakFlow(std::size_t i, std::span<const double> levels, Timestamp t, double dt) const {
  const double raw = leakCoefficient(i, t) * std::sqrt(std::max(levels[i], 0.0));
  if (raw == 0.0) return 0.0;
  double requested = raw;
  for (std::size_t j = 0; j < topo_.valves.size(); ++j) {
    const auto& v = topo_.valves[j];
    if (v.from == i) requested += opening(j, t) * effectiveK(j, t) * std::sqrt(std::max(levels[i], 0.0));
  }
  return raw * drainScale(topo_.tanks[i].area, levels[i], requested, dt);
}

SimState Plant::initialState(std::span<const double> levels, Timestamp t, double dt) const {
  SimState s;
  s.t = t;
  s.levels.assign(levels.begin(), levels.end());
  s.flows = flows(s.levels, t, dt);
  return s;
}

SimState Plant::step(const SimState& s, double dt, StepFluxes* fluxes, std::optional<Timestamp> nextT) const {
  const auto& tanks = topo_.tanks;
  const auto& valves = topo_.valves;
  StepFluxes fx;
  std::vector<double> net(tanks.size(), 0.0);
  for (std::size_t j = 0; j < valves.size(); ++j) {
    const double q = s.flows[j];
    if (valves[j].from)
      net[*valves[j].from] -= q;
    else
      fx.sourceIn += q;
    if (valves[j].to)
      net[*valves[j].to] += q;
    else
      fx.sinkOut += q;
  }
  SimState next;
  next.t = nextT.value_or(s.t + dt);
  next.levels.resize(tanks.size());
  for (std::size_t i = 0; i < tanks.size(); ++i) {
    const double leak = leakFlow(i, s.levels, s.t, dt);
    fx.leaks += leak;
    double h = s.levels[i] + dt * (net[i] - leak) / tanks[i].area;
    if (h > tanks[i].hMax) {
      fx.spill += (h - tanks[i].hMax) * tanks[i].area / dt;
      h = tanks[i].hMax;
    }
    next.levels[i] = std::max(h, 0.0);
  }
  next.flows = flows(next.levels, next.t, dt);
  if (fluxes) *fluxes = fx;
  return next;
}

std::vector<double> Plant::steadyLevels(std::optional<double> sourceFlowOverride) const {
  constexpr double kLate = std::numeric_limits<double>::max();
  const auto& valves = topo_.valves;
  std::vector<double> inflow(topo_.tanks.size(), 0.0);
  std::vector<double> h(topo_.tanks.size(), 0.0);
  for (std::size_t j = 0; j < valves.size(); ++j)
    if (!valves[j].from && valves[j].to) {
      const double src = sourceFlowOverride.value_or(topo_.sourceFlow * pumpFactor(kLate) * opening(j, kLate));
      inflow[*valves[j].to] += src;
    }
  for (std::size_t i : topo_.topologicalOrder()) {
    double c = leakCoefficient(i, kLate);
    for (std::size_t j = 0; j < valves.size(); ++j)
      if (valves[j].from == i) c += opening(j, kLate) * effectiveK(j, kLate);
    if (inflow[i] <= 0.0)
      h[i] = 0.0;
    else if (c <= 0.0)
      h[i] = topo_.tanks[i].hMax;
    else
      h[i] = std::min(std::pow(inflow[i] / c, 2.0), topo_.tanks[i].hMax);
    const double root = std::sqrt(h[i]);
    for (std::size_t j = 0; j < valves.size(); ++j)
      if (valves[j].from == i && valves[j].to) inflow[*valves[j].to] += opening(j, kLate) * effectiveK(j, kLate) * root;
  }
  return h;
}

std::vector<double> observe(const SimState& s) {
  std::vector<double> x = s.flows;
  x.insert(x.end(), s.levels.begin(), s.levels.end());
  return x;
}

// ---------------------------------------------------------------------------
// Scenario

BuiltScenario buildScenario(const Scenario& sc) {
  if (!(sc.dt > 0.0) || !std::isfinite(sc.dt)) invalid("dt must be > 0");
  if (!(sc.duration >= sc.dt) || !std::isfinite(sc.duration)) invalid("duration must be >= dt");
  if (!(sc.noiseSigma >= 0.0)) invalid("noise_sigma must be >= 0");
  if (sc.backend != "physics" && sc.backend != "knn-kde") invalid("unknown backend '" + sc.backend + "'");
  BuiltScenario built{makeTopology(sc.config), {}, {}};
  built.topology.validate();
  built.schema = built.topology.schema();
  built.components = built.topology.components();
  for (const auto& f : sc.faults) {
    auto it = std::find_if(built.components.begin(), built.components.end(),
                           [&](const Component& c) { return c.id == f.component; });
    if (it == built.components.end()) invalid("fault on unknown component '" + f.component + "'");
    if (!it->hasMode(faultModeName(f.mode)))
      invalid(std::string(faultModeName(f.mode)) + " is not a mode of " + std::string(kindName(it->kind)) + " '" +
              f.component + "'");
    if (!(f.onset >= 0.0)) invalid("fault onset must be >= 0");
    if (!(f.magnitude >= 0.0) || !std::isfinite(f.magnitude)) invalid("fault magnitude must be finite and >= 0");
  }
  for (const auto& c : sc.commands) {
    if (!built.topology.valveIndex(c.valve)) invalid("command for unknown valve '" + c.valve + "'");
    if (!(c.opening >= 0.0 && c.opening <= 1.0)) invalid("commanded opening outside [0,1]");
  }
  return built;
}

RunResult runDetailed(const Scenario& sc) {
  auto built = buildScenario(sc);
  const Plant plant(built.topology, sc.faults, sc.commands);
  const Plant nominal(built.topology, {}, sc.commands);

  const auto steady = nominal.steadyLevels();
  const auto steadySignals = observe(nominal.initialState(steady, 0.0, sc.dt));
  std::vector<double> sigma(steadySignals.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = sc.noiseSigma * std::abs(steadySignals[i]);

  std::vector<double> initLevels =
      sc.initial == InitialLevels::Steady ? steady : std::vector<double>(built.topology.tanks.size(), 0.0);

  const auto count = static_cast<std::size_t>(std::floor(sc.duration / sc.dt + 1e-9));
  RunResult out{DataStore(built.schema), {}, {}, {}};
  out.states.reserve(count);
  out.fluxes.reserve(count);

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SimState state = plant.initialState(initLevels, 0.0, sc.dt);
  for (std::size_t k = 0; k < count; ++k) {
    Sample sample{state.t, observe(state)};
    for (std::size_t i = 0; i < sample.x.size(); ++i) {
      const double n = gauss(rng);
      if (sigma[i] > 0.0) sample.x[i] += sigma[i] * n;
    }
    out.data.ingest(std::move(sample));

    Label label{state.t, false, "stable"};
    std::string names;
    for (const auto& f : sc.faults)
      if (state.t >= f.onset - kOnsetEpsilon) {
        label.anomalous = true;
        if (!names.empty()) names += '+';
        names += faultModeName(f.mode);
      }
    if (label.anomalous) label.label = names;
    out.labels.push_back(std::move(label));

    StepFluxes fx;
    SimState next = plant.step(state, sc.dt, &fx, static_cast<double>(k + 1) * sc.dt);
    out.states.push_back(std::move(state));
    out.fluxes.push_back(fx);
    state = std::move(next);
  }
  out.fluxes.pop_back();
  return out;
}

DataStore run(const Scenario& sc) { return runDetailed(sc).data; }

double massBalanceResidual(const Topology& topo, const SimState& before, const SimState& after,
                           const StepFluxes& fx, double dt) {
  double stored = 0.0;
  double storedAbs = 0.0;
  for (std::size_t i = 0; i < topo.tanks.size(); ++i) {
    const double dv = topo.tanks[i].area * (after.levels[i] - before.levels[i]);
    stored += dv;
    storedAbs += std::abs(dv);
  }
  const double exchanged = dt * (fx.sourceIn - fx.sinkOut - fx.leaks - fx.spill);
  const double scale = dt * (fx.sourceIn + fx.sinkOut + fx.leaks + fx.spill) + storedAbs;
  const double diff = std::abs(stored - exchanged);
  return scale > 0.0 ? diff / scale : diff;
}

Scenario parseScenario(std::istream& in) {
  Scenario sc;
  std::string line;
  std::size_t lineNo = 0;
  bool sawConfig = false;
  while (std::getline(in, line)) {
    ++lineNo;
    auto hash = line.find('#');
    auto body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(lineNo, "expected 'key = value'");
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    if (value.empty()) throw ParseError(lineNo, "missing value for '" + key + "'");

    if (key == "config") {
      auto c = parseConfig(value);
      if (!c) throw ParseError(lineNo, "unknown config '" + value + "'");
      sc.config = *c;
      sawConfig = true;
    } else if (key == "dt") {
      sc.dt = detail::parseReal(value, lineNo);
    } else if (key == "duration") {
      sc.duration = detail::parseReal(value, lineNo);
    } else if (key == "noise_sigma") {
      sc.noiseSigma = detail::parseReal(value, lineNo);
    } else if (key == "seed") {
      auto v = detail::parseInt(value, lineNo);
      if (v < 0) throw ParseError(lineNo, "seed must be non-negative");
      sc.seed = static_cast<std::uint64_t>(v);
    } else if (key == "backend") {
      sc.backend = value;
    } else if (key == "initial") {
      if (value == "steady")
        sc.initial = InitialLevels::Steady;
      else if (value == "empty")
        sc.initial = InitialLevels::Empty;
      else
        throw ParseError(lineNo, "initial must be 'steady' or 'empty'");
    } else if (key == "fault") {
      auto parts = detail::splitTrimmed(value, ' ');
      if (parts.size() < 3 || parts.size() > 4)
        throw ParseError(lineNo, "fault needs: <component> <mode> <onset> [magnitude]");
      auto mode = parseFaultMode(parts[1]);
      if (!mode) throw ParseError(lineNo, "unknown fault mode '" + parts[1] + "'");
      Fault f{parts[0], *mode, detail::parseReal(parts[2], lineNo), defaultMagnitude(*mode)};
      if (parts.size() == 4) f.magnitude = detail::parseReal(parts[3], lineNo);
      sc.faults.push_back(std::move(f));
    } else if (key == "command") {
      auto parts = detail::splitTrimmed(value, ' ');
      if (parts.size() != 3) throw ParseError(lineNo, "command needs: <valve> <at> <opening>");
      sc.commands.push_back({parts[0], detail::parseReal(parts[1], lineNo), detail::parseReal(parts[2], lineNo)});
    } else {
      throw ParseError(lineNo, "unknown key '" + key + "'");
    }
  }
  if (!sawConfig) throw ParseError(lineNo, "missing 'config'");
  return sc;
}

Scenario loadScenarioFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path);
  return parseScenario(in);
}

std::string formatScenario(const Scenario& sc) {
  std::ostringstream out;
  out << "config = " << configName(sc.config) << '\n'
      << "dt = " << formatReal(sc.dt) << '\n'
      << "duration = " << formatReal(sc.duration) << '\n'
      << "noise_sigma = " << formatReal(sc.noiseSigma) << '\n'
      << "seed = " << sc.seed << '\n'
      << "backend = " << sc.backend << '\n'
      << "initial = " << (sc.initial == InitialLevels::Steady ? "steady" : "empty") << '\n';
  for (const auto& f : sc.faults)
    out << "fault = " << f.component << ' ' << faultModeName(f.mode) << ' ' << formatReal(f.onset) << ' '
        << formatReal(f.magnitude) << '\n';
  for (const auto& c : sc.commands)
    out << "command = " << c.valve << ' ' << formatReal(c.at) << ' ' << formatReal(c.opening) << '\n';
  return out.str();
}

void saveLabelsCsv(std::span<const Label> labels, std::ostream& out) {
  out << "t,is_anomalous,label\n";
  for (const auto& l : labels) out << formatReal(l.t) << ',' << (l.anomalous ? 1 : 0) << ',' << l.label << '\n';
}

std::vector<Label> loadLabelsCsv(std::istream& in) {
  std::vector<Label> out;
  std::string line;
  std::size_t lineNo = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing labels header");
  ++lineNo;
  if (detail::trim(line) != "t,is_anomalous,label") throw ParseError(1, "labels header must be t,is_anomalous,label");
  while (std::getline(in, line)) {
    ++lineNo;
    auto body = detail::trim(line);
    if (body.empty()) continue;
    auto cells = detail::split(body, ',');
    if (cells.size() != 3) throw ParseError(lineNo, "expected 3 columns");
    auto flag = detail::parseInt(cells[1], lineNo);
    if (flag != 0 && flag != 1) throw ParseError(lineNo, "is_anomalous must be 0 or 1");
    out.push_back({detail::parseReal(cells[0], lineNo), flag == 1, std::string(detail::trim(cells[2]))});
  }
  return out;
}

}  // namespace aitwin::sim
