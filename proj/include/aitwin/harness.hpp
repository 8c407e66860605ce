#pragma once

// Evaluation harness: scenario runs on disk, anomaly-detection scoring with
// AUC / F1, diagnosis checkpoints, and the fault catalogue of the benchmark.

#include <filesystem>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aitwin/causality.hpp"
#include "aitwin/diagnosis.hpp"
#include "aitwin/prediction.hpp"
#include "aitwin/simulator.hpp"

namespace aitwin::harness {

struct ScoredLabel {
  double score = 0.0;  // normality; low = anomalous
  bool anomalous = false;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
  std::string config;
  std::string fault;
  std::string mode;  // "dynamic" | "static"
  std::optional<double> auc;  // null unless both classes occur
  double f1 = 0.0;
  double threshold = 0.0;
  double fpr = 0.0;
  Confusion counts;
};

/// Mann-Whitney AUC with anomalous as the positive class ranked by -score;
/// ties count one half. Null unless both classes are present.
std::optional<double> rankAuc(std::span<const ScoredLabel> scores);

/// Flags score < threshold. F1 is 1 when there is nothing to find and nothing
/// was flagged. Throws EmptyInput.
EvalReport evaluateAnomaly(std::span<const ScoredLabel> scores, double threshold);

/// q-quantile with linear interpolation between order statistics. Throws EmptyInput.
double percentile(std::vector<double> values, double q);

inline constexpr double kThresholdQuantile = 0.05;
inline constexpr std::size_t kWindow = 20;
inline constexpr double kTrainDuration = 400.0;
inline constexpr double kTestDuration = 200.0;
inline constexpr double kFaultOnset = 100.0;
inline constexpr std::uint64_t kTrainSeed = 1;
inline constexpr std::uint64_t kStableSeed = 2;
inline constexpr std::uint64_t kFaultSeed = 3;

struct FaultCase {
  sim::Config config = sim::Config::FourTanks;
  std::string name;  // "stable" for the fault-free case
  std::vector<sim::Fault> faults;
};

/// One entry per benchmark row, stable rows first per config.
std::vector<FaultCase> faultCatalogue();
/// Throws InvalidScenario when unknown.
FaultCase findFaultCase(sim::Config config, std::string_view name);

sim::Scenario trainingScenario(sim::Config config, std::string backend = "knn-kde");
sim::Scenario testScenario(const FaultCase& fc, std::string backend = "knn-kde");

struct DetectionResult {
  EvalReport dynamicReport;
  EvalReport staticReport;
  std::vector<ScoredLabel> dynamicScores;
  std::vector<ScoredLabel> staticScores;
};

/// Fits on `train`, scores every window of `window` samples of `test`
/// dynamically (stride 1) and every test sample statically. `labels[k]`
/// belongs to test sample k. Throws SchemaMismatch.
DetectionResult detect(const DataStore& train, const DataStore& test, std::span<const sim::Label> labels,
                       const BackendFactory& factory, std::size_t window = kWindow);

/// The fixture config whose signal layout equals `schema`, if any.
std::optional<sim::Config> inferConfig(const SignalSchema& schema);

/// Writes data.csv, labels.csv and manifest.json into outDir. Throws IoError.
void runScenario(const sim::Scenario& scenario, const std::filesystem::path& outDir, std::string_view name);

struct RunArtifacts {
  DataStore data;
  std::vector<sim::Label> labels;
  sim::Scenario scenario;
};
/// Reads a directory written by runScenario. Throws IoError / ParseError.
RunArtifacts loadRun(const std::filesystem::path& dir);

struct Checkpoint {
  Timestamp t = 0.0;
  ObservationSet observations;
  std::vector<Diagnosis> diagnoses;
};

/// Diagnoses the run at each checkpoint time.
std::vector<Checkpoint> diagnoseRun(const DataStore& data, const CausalModel& model,
                                    const std::vector<GuardedRule>& rules, const PredicateBindings& bindings,
                                    const std::set<std::string>& comps, std::span<const Timestamp> checkpoints);

std::string reportToJson(const EvalReport& r);
EvalReport reportFromJson(std::string_view text);
/// Fixed-width table, one row per report.
std::string formatReportTable(std::span<const EvalReport> reports);

}  // namespace aitwin::harness
