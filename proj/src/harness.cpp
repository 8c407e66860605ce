#include "aitwin/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aitwin/error.hpp"

namespace aitwin::harness {

using nlohmann::json;

std::optional<double> rankAuc(std::span<const ScoredLabel> scores) {
  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });
  double pos = 0.0, neg = 0.0, wins = 0.0;
  // Walk ascending scores; an anomalous sample beats every normal one with a higher score.
  std::size_t k = 0;
  double negBelow = 0.0;
  std::vector<std::pair<double, double>> groups;  // (anomalous, normal) per tie group
  while (k < sorted.size()) {
    std::size_t m = k;
    double a = 0.0, n = 0.0;
    while (m < sorted.size() && sorted[m].score == sorted[k].score) {
      (sorted[m].anomalous ? a : n) += 1.0;
      ++m;
    }
    groups.emplace_back(a, n);
    pos += a;
    neg += n;
    k = m;
  }
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  for (const auto& [a, n] : groups) {
    wins += a * (neg - negBelow - n) + 0.5 * a * n;
    negBelow += n;
  }
  return wins / (pos * neg);
}

EvalReport evaluateAnomaly(std::span<const ScoredLabel> scores, double threshold) {
  if (scores.empty()) throw TwinError(Errc::EmptyInput, "no scores to evaluate");
  EvalReport r;
  r.threshold = threshold;
  for (const auto& s : scores) {
    const bool flagged = s.score < threshold;
    if (s.anomalous)
      ++(flagged ? r.counts.tp : r.counts.fn);
    else
      ++(flagged ? r.counts.fp : r.counts.tn);
  }
  const auto& c = r.counts;
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp + c.fn);
  r.f1 = denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / denom;
  r.fpr = c.fp + c.tn == 0 ? 0.0 : static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  r.auc = rankAuc(scores);
  return r;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw TwinError(Errc::EmptyInput, "percentile of nothing");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Catalogue

namespace {

using sim::Config;
using sim::Fault;
using sim::FaultMode;

Fault at(std::string comp, FaultMode mode, double magnitude) { return {std::move(comp), mode, kFaultOnset, magnitude}; }

}  // namespace

std::vector<FaultCase> faultCatalogue() {
  return {
      {Config::ATank, "stable", {}},
      {Config::ATank, "pumpSlow", {at("pump", FaultMode::PumpSlow, 0.5)}},
      {Config::ATank, "tank1_leak", {at("t1", FaultMode::TankLeak, 0.02)}},
      {Config::ATank, "valve0Block", {at("v0", FaultMode::ValveBlock, 1.0)}},
      {Config::ATank, "valve1Block", {at("v1", FaultMode::ValveBlock, 1.0)}},
      {Config::FourTanks, "stable", {}},
      {Config::FourTanks, "pipe4_jam", {at("v4", FaultMode::PipeJam, 0.3)}},
      {Config::FourTanks, "tank2_leak", {at("t2", FaultMode::TankLeak, 0.02)}},
      {Config::FourTanks, "valve3_jam", {at("v3", FaultMode::ValveStuck, 0.3)}},
      {Config::FourTanks, "valve6_jam", {at("v6", FaultMode::ValveStuck, 0.8)}},
      {Config::ThreeTanks, "stable", {}},
      {Config::ThreeTanks, "pumpFast", {at("pump", FaultMode::PumpFast, 1.2)}},
      {Config::ThreeTanks, "pumpSlow", {at("pump", FaultMode::PumpSlow, 0.5)}},
      {Config::ThreeTanks, "tank1Leak", {at("t1", FaultMode::TankLeak, 0.02)}},
      {Config::ThreeTanks, "tank2Leak", {at("t2", FaultMode::TankLeak, 0.02)}},
      {Config::ThreeTanks, "valve2Closed", {at("v2", FaultMode::ValveStuck, 0.0)}},
      {Config::ThreeTanks, "valve3Closed", {at("v3", FaultMode::ValveStuck, 0.0)}},
  };
}

FaultCase findFaultCase(sim::Config config, std::string_view name) {
  for (auto& fc : faultCatalogue())
    if (fc.config == config && fc.name == name) return fc;
  throw TwinError(Errc::InvalidScenario,
                  "no catalogue entry '" + std::string(name) + "' for " + std::string(sim::configName(config)));
}

sim::Scenario trainingScenario(sim::Config config, std::string backend) {
  sim::Scenario sc;
  sc.config = config;
  sc.duration = kTrainDuration;
  sc.seed = kTrainSeed;
  sc.backend = std::move(backend);
  return sc;
}

sim::Scenario testScenario(const FaultCase& fc, std::string backend) {
  sim::Scenario sc;
  sc.config = fc.config;
  sc.faults = fc.faults;
  sc.duration = kTestDuration;
  sc.seed = fc.faults.empty() ? kStableSeed : kFaultSeed;
  sc.backend = std::move(backend);
  return sc;
}

// ---------------------------------------------------------------------------
// Detection

DetectionResult detect(const DataStore& train, const DataStore& test, std::span<const sim::Label> labels,
                       const BackendFactory& factory, std::size_t window) {
  if (!(train.schema() == test.schema())) throw TwinError(Errc::SchemaMismatch, "train and test signals differ");
  if (labels.size() != test.size())
    throw TwinError(Errc::SchemaMismatch, "labels (" + std::to_string(labels.size()) + ") do not match test samples (" +
                                              std::to_string(test.size()) + ")");
  if (window < 2) throw TwinError(Errc::WindowTooShort, "detection window must hold at least two samples");
  const auto history = train.samples();
  const auto samples = test.samples();
  for (std::size_t k = 0; k < samples.size(); ++k)
    if (std::abs(labels[k].t - samples[k].at) > kTimeEpsilon)
      throw TwinError(Errc::SchemaMismatch, "label times do not match test samples");

  const auto model = FittedModel::fit(factory, history);
  Session session(model, nullptr, train.schema().size());

  DetectionResult out;
  for (std::size_t k = 0; k < samples.size(); ++k)
    out.staticScores.push_back({model->staticScore(samples[k].x), labels[k].anomalous});
  for (std::size_t end = window; end <= samples.size(); ++end) {
    std::span<const Sample> w(samples.data() + end - window, window);
    out.dynamicScores.push_back({session.anomalyScoreDynamic(w), labels[end - 1].anomalous});
  }
  out.staticReport = evaluateAnomaly(out.staticScores, percentile(model->trainingStaticScores(), kThresholdQuantile));
  out.staticReport.mode = "static";
  out.dynamicReport = evaluateAnomaly(out.dynamicScores, percentile(model->trainingDynamicScores(), kThresholdQuantile));
  out.dynamicReport.mode = "dynamic";
  return out;
}

std::optional<sim::Config> inferConfig(const SignalSchema& schema) {
  for (auto c : {sim::Config::ATank, sim::Config::ThreeTanks, sim::Config::FourTanks})
    if (sim::makeTopology(c).schema() == schema) return c;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Run artifacts

namespace {

std::ofstream openOut(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw TwinError(Errc::IoError, "cannot write " + p.string());
  return out;
}

std::ifstream openIn(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + p.string());
  return in;
}

}  // namespace

void runScenario(const sim::Scenario& scenario, const std::filesystem::path& outDir, std::string_view name) {
  const auto result = sim::runDetailed(scenario);
  std::error_code ec;
  std::filesystem::create_directories(outDir, ec);
  if (ec) throw TwinError(Errc::IoError, "cannot create " + outDir.string() + ": " + ec.message());

  {
    auto out = openOut(outDir / "data.csv");
    saveCsv(result.data, out);
  }
  {
    auto out = openOut(outDir / "labels.csv");
    sim::saveLabelsCsv(result.labels, out);
  }
  json faults = json::array();
  for (const auto& f : scenario.faults)
    faults.push_back({{"component", f.component},
                      {"mode", sim::faultModeName(f.mode)},
                      {"onset", f.onset},
                      {"magnitude", f.magnitude}});
  json commands = json::array();
  for (const auto& c : scenario.commands) commands.push_back({{"valve", c.valve}, {"at", c.at}, {"opening", c.opening}});
  json manifest = {
      {"scenario", name},
      {"config", sim::configName(scenario.config)},
      {"seed", scenario.seed},
      {"dt", scenario.dt},
      {"duration", scenario.duration},
      {"noise_sigma", scenario.noiseSigma},
      {"backend", scenario.backend},
      {"initial", scenario.initial == sim::InitialLevels::Steady ? "steady" : "empty"},
      {"faults", faults},
      {"commands", commands},
      {"samples", result.data.size()},
      {"files", {{"data", "data.csv"}, {"labels", "labels.csv"}}},
  };
  auto out = openOut(outDir / "manifest.json");
  out << manifest.dump(2) << '\n';
  out << std::flush;
  if (!out) throw TwinError(Errc::IoError, "failed writing manifest in " + outDir.string());
}

RunArtifacts loadRun(const std::filesystem::path& dir) {
  auto manifestIn = openIn(dir / "manifest.json");
  json m;
  try {
    manifestIn >> m;
  } catch (const json::exception& e) {
    throw ParseError(0, "manifest.json: " + std::string(e.what()));
  }
  sim::Scenario sc;
  try {
    auto config = sim::parseConfig(m.at("config").get<std::string>());
    if (!config) throw ParseError(0, "manifest.json: unknown config");
    sc.config = *config;
    sc.seed = m.at("seed").get<std::uint64_t>();
    sc.dt = m.at("dt").get<double>();
    sc.duration = m.at("duration").get<double>();
    sc.noiseSigma = m.at("noise_sigma").get<double>();
    sc.backend = m.at("backend").get<std::string>();
    sc.initial = m.at("initial").get<std::string>() == "empty" ? sim::InitialLevels::Empty : sim::InitialLevels::Steady;
    for (const auto& f : m.at("faults")) {
      auto mode = sim::parseFaultMode(f.at("mode").get<std::string>());
      if (!mode) throw ParseError(0, "manifest.json: unknown fault mode");
      sc.faults.push_back({f.at("component").get<std::string>(), *mode, f.at("onset").get<double>(),
                           f.at("magnitude").get<double>()});
    }
    for (const auto& c : m.at("commands"))
      sc.commands.push_back({c.at("valve").get<std::string>(), c.at("at").get<double>(), c.at("opening").get<double>()});
  } catch (const json::exception& e) {
    throw ParseError(0, "manifest.json: " + std::string(e.what()));
  }
  auto dataIn = openIn(dir / "data.csv");
  auto labelsIn = openIn(dir / "labels.csv");
  return {loadCsv(dataIn), sim::loadLabelsCsv(labelsIn), std::move(sc)};
}

std::vector<Checkpoint> diagnoseRun(const DataStore& data, const CausalModel& model,
                                    const std::vector<GuardedRule>& rules, const PredicateBindings& bindings,
                                    const std::set<std::string>& comps, std::span<const Timestamp> checkpoints) {
  std::vector<Checkpoint> out;
  for (Timestamp t : checkpoints) {
    auto obs = observationsFromTwin(data, model, t, bindings);
    auto dx = diagnose(rules, obs, comps);
    out.push_back({t, std::move(obs), std::move(dx)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string reportToJson(const EvalReport& r) {
  json j = {{"config", r.config},
            {"fault", r.fault},
            {"mode", r.mode},
            {"auc", r.auc ? json(*r.auc) : json(nullptr)},
            {"f1", r.f1},
            {"threshold", r.threshold},
            {"fpr", r.fpr},
            {"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"tn", r.counts.tn},
            {"fn", r.counts.fn}};
  return j.dump(2);
}

EvalReport reportFromJson(std::string_view text) {
  try {
    const auto j = json::parse(text);
    EvalReport r;
    r.config = j.at("config").get<std::string>();
    r.fault = j.at("fault").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.fpr = j.at("fpr").get<double>();
    r.counts = {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("tn").get<std::size_t>(),
                j.at("fn").get<std::size_t>()};
    return r;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("evaluation report: ") + e.what());
  }
}

std::string formatReportTable(std::span<const EvalReport> reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-14s %-8s %7s %7s %7s %5s %5s %5s %5s\n", "config", "fault", "mode", "AUC",
                "F1", "FPR", "TP", "FP", "TN", "FN");
  out << line;
  for (const auto& r : reports) {
    char auc[16];
    if (r.auc)
      std::snprintf(auc, sizeof auc, "%.3f", *r.auc);
    else
      std::snprintf(auc, sizeof auc, "-");
    std::snprintf(line, sizeof line, "%-10s %-14s %-8s %7s %7.3f %7.3f %5zu %5zu %5zu %5zu\n", r.config.c_str(),
                  r.fault.c_str(), r.mode.c_str(), auc, r.f1, r.fpr, r.counts.tp, r.counts.fp, r.counts.tn,
                  r.counts.fn);
    out << line;
  }
  return out.str();
}

}  // namespace aitwin::harness
