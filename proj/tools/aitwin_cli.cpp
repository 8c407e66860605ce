#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "aitwin/causality.hpp"
#include "aitwin/diagnosis.hpp"
#include "aitwin/error.hpp"
#include "aitwin/harness.hpp"
#include "aitwin/modelgen.hpp"
#include "aitwin/planning.hpp"
#include "aitwin/simulator.hpp"
#include "aitwin/twin.hpp"

namespace fs = std::filesystem;
using namespace aitwin;

namespace {

// 0 success, 2 parse/validation, 3 no plan / unexplainable observations, 4 I/O.
int exitCodeFor(Errc code) {
  switch (code) {
    case Errc::IoError: return 4;
    case Errc::NoPlanFound:
    case Errc::ContradictoryObservation: return 3;
    default: return 2;
  }
}

void writeText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw TwinError(Errc::IoError, "cannot write " + path.string());
}

std::string readText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream openIn(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path.string());
  return in;
}

int cmdSimulate(const std::string& scenarioFile, std::string outDir) {
  auto sc = sim::loadScenarioFile(scenarioFile);
  const auto name = fs::path(scenarioFile).stem().string();
  if (outDir.empty()) outDir = (fs::path("runs") / name).string();
  harness::runScenario(sc, outDir, name);
  std::cout << "wrote " << outDir << "/{data.csv,labels.csv,manifest.json}\n";
  return 0;
}

int cmdDetect(const std::string& trainCsv, const std::string& testCsv, const std::string& labelsCsv,
              const std::string& backend, std::size_t window, const std::string& out) {
  const auto train = loadCsvFile(trainCsv);
  const auto test = loadCsvFile(testCsv);
  auto labelsIn = openIn(labelsCsv);
  const auto labels = sim::loadLabelsCsv(labelsIn);
  const auto config = harness::inferConfig(train.schema());
  if (backend == "physics" && !config)
    throw TwinError(Errc::SchemaMismatch, "physics backend needs a signal layout of a known plant configuration");
  const auto topo = sim::makeTopology(config.value_or(sim::Config::FourTanks));
  auto result = harness::detect(train, test, labels, makeBackend(backend, topo), window);

  std::string fault = "stable";
  for (const auto& l : labels)
    if (l.anomalous) {
      fault = l.label;
      break;
    }
  for (auto* r : {&result.dynamicReport, &result.staticReport}) {
    r->config = config ? std::string(sim::configName(*config)) : "custom";
    r->fault = fault;
  }
  const std::vector<harness::EvalReport> reports{result.dynamicReport, result.staticReport};
  std::cout << harness::formatReportTable(reports);
  if (!out.empty()) {
    fs::create_directories(out);
    writeText(fs::path(out) / "eval_dynamic.json", harness::reportToJson(result.dynamicReport) + "\n");
    writeText(fs::path(out) / "eval_static.json", harness::reportToJson(result.staticReport) + "\n");
  }
  return 0;
}

int cmdDiagnose(const std::string& rulesFile, const std::string& runDir, const std::string& bindingsFile,
                const std::string& modelFile, std::vector<double> at, double every, const std::string& out) {
  const auto rules = loadRulesFile(rulesFile);
  const auto bindings = loadBindingsFile(bindingsFile);
  const auto run = harness::loadRun(runDir);
  const auto built = sim::buildScenario(run.scenario);
  if (!(run.data.schema() == built.schema)) throw TwinError(Errc::SchemaMismatch, "run data does not match its manifest");

  std::set<std::string> comps;
  for (const auto& c : built.components) comps.insert(c.id);
  std::optional<CausalModel> model;
  if (modelFile.empty()) {
    model.emplace(generateModel(built.topology).causal);
  } else {
    model.emplace(built.schema.size(), std::vector<std::string>(comps.begin(), comps.end()));
    loadDefinitionsFile(modelFile, *model, built.schema);
  }

  if (at.empty()) {
    const auto [first, last] = run.data.timeRange();
    if (!(every > 0.0)) throw TwinError(Errc::InvalidHorizon, "--every must be > 0");
    for (double t = first; t <= last + kTimeEpsilon; t += every) at.push_back(t);
  }
  const auto checkpoints = harness::diagnoseRun(run.data, *model, rules, bindings, comps, at);
  std::string text;
  bool explained = true;
  for (const auto& cp : checkpoints) {
    text += formatDiagnosisReport(cp.t, cp.observations, cp.diagnoses) + "\n";
    explained = explained && !cp.diagnoses.empty();
  }
  std::cout << text;
  if (!out.empty()) writeText(out, text);
  return explained ? 0 : 3;
}

int cmdPlan(const std::string& stepsFile, const std::string& initial, const std::string& goal,
            const std::string& available, std::size_t maxDepth, const std::string& out) {
  CausalModel model(0);
  auto in = openIn(stepsFile);
  loadDefinitions(in, model, SignalSchema());
  const auto steps = model.productCausalities();
  std::set<std::string> avail;
  if (available == "*") {
    for (const auto& s : steps) avail.insert(s.ok.begin(), s.ok.end());
  } else {
    for (auto& c : CLI::detail::split(available, ','))
      if (!c.empty()) avail.insert(c);
  }
  const auto p = plan(steps, parseMultiset(initial), parseMultiset(goal), avail, maxDepth);
  std::string text;
  for (const auto& s : p.steps) text += s + "\n";
  std::cout << text;
  if (!out.empty()) writeText(out, text);
  return 0;
}

std::vector<harness::EvalReport> collectReports(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename().string().rfind("eval_", 0) == 0)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<harness::EvalReport> reports;
  for (const auto& f : files) reports.push_back(harness::reportFromJson(readText(f)));
  return reports;
}

int cmdReport(const std::string& dir) {
  if (!fs::is_directory(dir)) throw TwinError(Errc::IoError, dir + " is not a directory");
  const auto table = harness::formatReportTable(collectReports(dir));
  std::cout << table;
  writeText(fs::path(dir) / "report.txt", table);
  return 0;
}

int cmdBenchmark(const std::string& dir, const std::string& backend) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<harness::EvalReport> reports;
  for (auto config : {sim::Config::ATank, sim::Config::FourTanks, sim::Config::ThreeTanks}) {
    const auto trainSc = harness::trainingScenario(config, backend);
    const auto train = sim::run(trainSc);
    const auto topo = sim::makeTopology(config);
    for (const auto& fc : harness::faultCatalogue()) {
      if (fc.config != config) continue;
      const auto test = sim::runDetailed(harness::testScenario(fc, backend));
      auto r = harness::detect(train, test.data, test.labels, makeBackend(backend, topo));
      const auto caseDir = fs::path(dir) / std::string(sim::configName(config)) / fc.name;
      fs::create_directories(caseDir);
      for (auto* rep : {&r.dynamicReport, &r.staticReport}) {
        rep->config = std::string(sim::configName(config));
        rep->fault = fc.name;
        writeText(caseDir / ("eval_" + rep->mode + ".json"), harness::reportToJson(*rep) + "\n");
        reports.push_back(*rep);
      }
    }
  }
  const auto table = harness::formatReportTable(reports);
  std::cout << table;
  writeText(fs::path(dir) / "report.txt", table);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "elapsed " << std::round(secs * 100.0) / 100.0 << " s\n";
  return 0;
}

int cmdModel(const std::string& configName, const std::string& dir) {
  const auto config = sim::parseConfig(configName);
  if (!config) throw TwinError(Errc::InvalidScenario, "unknown config '" + configName + "'");
  const auto topo = sim::makeTopology(*config);
  const auto gm = generateModel(topo);
  std::string rules;
  for (const auto& r : gm.rules) rules += formatRule(r) + "\n";
  std::string bindings;
  for (const auto& [p, c] : gm.bindings) bindings += p + " = " + c + "\n";
  fs::create_directories(dir);
  writeText(fs::path(dir) / "model.def", formatDefinitions(gm.causal, topo.schema()));
  writeText(fs::path(dir) / "rules.txt", rules);
  writeText(fs::path(dir) / "bindings.txt", bindings);
  std::cout << "wrote " << dir << "/{model.def,rules.txt,bindings.txt}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aitwin: digital twin toolkit for tank processes"};
  app.require_subcommand(1);

  std::string scenarioFile, outDir;
  auto* simulate = app.add_subcommand("simulate", "run a scenario file and write data, labels and manifest");
  simulate->add_option("scenario", scenarioFile)->required();
  simulate->add_option("-o,--out", outDir, "output directory (default runs/<scenario>)");

  std::string trainCsv, testCsv, labelsCsv, backend = "knn-kde", detectOut;
  std::size_t window = harness::kWindow;
  auto* detect = app.add_subcommand("detect", "fit on a fault-free run and score a test run");
  detect->add_option("train", trainCsv)->required();
  detect->add_option("test", testCsv)->required();
  detect->add_option("labels", labelsCsv)->required();
  detect->add_option("--backend", backend)->check(CLI::IsMember({"knn-kde", "physics"}));
  detect->add_option("--window", window)->check(CLI::Range(2, 100000));
  detect->add_option("-o,--out", detectOut, "directory for eval_*.json");

  std::string rulesFile, runDir, bindingsFile, modelFile, diagnoseOut;
  std::vector<double> at;
  double every = 20.0;
  auto* diagnose = app.add_subcommand("diagnose", "diagnose a recorded run at checkpoints");
  diagnose->add_option("rules", rulesFile)->required();
  diagnose->add_option("run-dir", runDir)->required();
  diagnose->add_option("bindings", bindingsFile)->required();
  diagnose->add_option("--model", modelFile, "definitions file (default: generated from the run's topology)");
  diagnose->add_option("--at", at, "checkpoint times (space or comma separated)")->delimiter(',');
  diagnose->add_option("--every", every, "checkpoint spacing when --at is absent");
  diagnose->add_option("-o,--out", diagnoseOut, "report file");

  std::string stepsFile, initial, goal, available = "*", planOut;
  std::size_t maxDepth = 8;
  auto* planCmd = app.add_subcommand("plan", "plan process steps from initial products to a goal");
  planCmd->add_option("steps", stepsFile)->required();
  planCmd->add_option("initial", initial)->required();
  planCmd->add_option("goal", goal)->required();
  planCmd->add_option("--available", available, "comma-separated available components ('*' = all)");
  planCmd->add_option("--max-depth", maxDepth)->check(CLI::Range(1, 1000));
  planCmd->add_option("-o,--out", planOut, "plan file");

  std::string reportDir;
  auto* report = app.add_subcommand("report", "tabulate eval_*.json files under a directory");
  report->add_option("dir", reportDir)->required();

  std::string benchDir = "bench", benchBackend = "knn-kde";
  auto* bench = app.add_subcommand("benchmark", "evaluate every catalogue fault case");
  bench->add_option("dir", benchDir);
  bench->add_option("--backend", benchBackend)->check(CLI::IsMember({"knn-kde", "physics"}));

  std::string modelConfig, modelDir = ".";
  auto* modelCmd = app.add_subcommand("model", "write the generated causal model, rules and bindings");
  modelCmd->add_option("config", modelConfig)->required();
  modelCmd->add_option("-o,--out", modelDir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmdSimulate(scenarioFile, outDir);
    if (*detect) return cmdDetect(trainCsv, testCsv, labelsCsv, backend, window, detectOut);
    if (*diagnose) return cmdDiagnose(rulesFile, runDir, bindingsFile, modelFile, at, every, diagnoseOut);
    if (*planCmd) return cmdPlan(stepsFile, initial, goal, available, maxDepth, planOut);
    if (*report) return cmdReport(reportDir);
    if (*bench) return cmdBenchmark(benchDir, benchBackend);
    if (*modelCmd) return cmdModel(modelConfig, modelDir);
  } catch (const TwinError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
