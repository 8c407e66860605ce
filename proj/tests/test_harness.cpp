#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "aitwin/error.hpp"
#include "aitwin/harness.hpp"
#include "aitwin/simulator.hpp"
#include "aitwin/twin.hpp"
#include "oracles.hpp"

using namespace aitwin;
using namespace aitwin::harness;
namespace fs = std::filesystem;

namespace {

Errc codeOf(auto&& fn) {
  try {
    fn();
  } catch (const TwinError& e) {
    return e.code();
  }
  FAIL("expected a TwinError");
  return Errc::IoError;
}

std::vector<std::pair<double, bool>> asPairs(const std::vector<ScoredLabel>& s) {
  std::vector<std::pair<double, bool>> out;
  for (const auto& e : s) out.emplace_back(e.score, e.anomalous);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Fresh scratch directory per process.
fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aitwin_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int exitCode = -1;
  std::string out;
};

CliResult cli(const std::string& args, const fs::path& dir) {
  const auto outFile = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + AITWIN_CLI + "\" " + args + " > \"" + outFile.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(outFile)};
}

// "{a:1, b:2}" -> "a:1, b:2"
std::string bare(const ProductMultiset& m) {
  const auto s = formatMultiset(m);
  return s.substr(1, s.size() - 2);
}

std::string scenarioPath(const std::string& stem) { return std::string(AITWIN_SCENARIO_DIR) + "/" + stem + ".scn"; }

}  // namespace

TEST_CASE("AUC examples") {
  const std::vector<ScoredLabel> perfect{{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}};
  CHECK(*rankAuc(perfect) == 1.0);
  const std::vector<ScoredLabel> ties{{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}, {0.5, false}};
  CHECK(*rankAuc(ties) == 0.5);
  const std::vector<ScoredLabel> oneClass{{0.1, false}, {0.2, false}};
  CHECK_FALSE(rankAuc(oneClass).has_value());
}

TEST_CASE("AUC on a hand list equals pairwise counting") {
  const std::vector<ScoredLabel> hand{
      {0.91, false}, {0.12, true},  {0.55, false}, {0.55, true},  {0.30, true},  {0.78, false}, {0.05, true},
      {0.66, false}, {0.40, false}, {0.40, true},  {0.99, false}, {0.21, true},  {0.83, true},  {0.47, false},
      {0.33, false}, {0.18, true},  {0.72, false}, {0.60, true},  {0.88, false}, {0.12, false}};
  // 9 anomalous x 11 normal = 99 pairs: 74 wins, 3 ties.
  CHECK(*rankAuc(hand) == doctest::Approx(75.5 / 99.0).epsilon(1e-15));
  CHECK(*rankAuc(hand) == doctest::Approx(*oracle::pairwiseAuc(asPairs(hand))).epsilon(1e-15));
}

TEST_CASE("property: AUC oracle agreement, monotone invariance, label flip") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::bernoulli_distribution label(0.3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoredLabel> s(5 + trial % 60);
    for (auto& e : s) e = {coarse(rng) / 10.0, label(rng)};
    const auto auc = rankAuc(s);
    const auto want = oracle::pairwiseAuc(asPairs(s));
    REQUIRE(auc.has_value() == want.has_value());
    if (!auc) continue;
    CHECK(*auc == doctest::Approx(*want).epsilon(1e-12));

    auto mapped = s;
    for (auto& e : mapped) e.score = std::exp(3.0 * e.score) - 7.0;
    CHECK(*rankAuc(mapped) == doctest::Approx(*auc).epsilon(1e-12));

    auto flipped = s;
    for (auto& e : flipped) e.anomalous = !e.anomalous;
    CHECK(*rankAuc(flipped) == doctest::Approx(1.0 - *auc).epsilon(1e-12));
  }
}

TEST_CASE("evaluateAnomaly counts and F1") {
  const std::vector<ScoredLabel> s{{0.1, true}, {0.3, true}, {0.2, false}, {0.9, false}, {0.95, true}};
  const auto r = evaluateAnomaly(s, 0.25);
  CHECK(r.counts.tp == 1);
  CHECK(r.counts.fp == 1);
  CHECK(r.counts.fn == 2);
  CHECK(r.counts.tn == 1);
  CHECK(r.f1 == doctest::Approx(2.0 / 5.0));
  CHECK(r.fpr == doctest::Approx(0.5));
  CHECK(r.threshold == 0.25);

  const std::vector<ScoredLabel> quiet{{0.5, false}, {0.6, false}};
  const auto q = evaluateAnomaly(quiet, 0.1);
  CHECK(q.f1 == 1.0);
  CHECK(q.fpr == 0.0);
  CHECK_FALSE(q.auc.has_value());
  CHECK(codeOf([] { evaluateAnomaly({}, 0.5); }) == Errc::EmptyInput);
}

TEST_CASE("percentile interpolates between order statistics") {
  CHECK(percentile({4.0, 1.0, 3.0, 2.0, 5.0}, 0.0) == 1.0);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0, 5.0}, 1.0) == 5.0);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0, 5.0}, 0.5) == 3.0);
  CHECK(percentile({0.0, 10.0}, 0.05) == doctest::Approx(0.5));
  std::vector<double> hundred;
  for (int k = 0; k < 101; ++k) hundred.push_back(k);
  CHECK(percentile(hundred, 0.05) == doctest::Approx(5.0));
  CHECK(codeOf([] { percentile({}, 0.5); }) == Errc::EmptyInput);
}

TEST_CASE("report JSON round trip and table") {
  EvalReport r{"4_tanks", "pipe4_jam", "dynamic", 0.987, 0.9, 0.12, 0.03, {10, 1, 80, 2}};
  const auto back = reportFromJson(reportToJson(r));
  CHECK(back.config == r.config);
  CHECK(back.fault == r.fault);
  CHECK(back.mode == r.mode);
  CHECK(*back.auc == *r.auc);
  CHECK(back.f1 == r.f1);
  CHECK(back.counts.fn == 2);
  EvalReport none = r;
  none.auc.reset();
  CHECK_FALSE(reportFromJson(reportToJson(none)).auc.has_value());
  const std::vector<EvalReport> both{r, none};
  const auto table = formatReportTable(both);
  CHECK(table.find("pipe4_jam") != std::string::npos);
  CHECK(codeOf([] { reportFromJson("{not json"); }) == Errc::ParseError);
}

TEST_CASE("fault catalogue is complete and resolvable") {
  const auto cat = faultCatalogue();
  CHECK(cat.size() == 17);
  for (const auto& fc : cat) {
    CHECK_NOTHROW(sim::buildScenario(testScenario(fc)));
    CHECK(findFaultCase(fc.config, fc.name).name == fc.name);
  }
  CHECK(codeOf([] { findFaultCase(sim::Config::FourTanks, "meteor"); }) == Errc::InvalidScenario);
  CHECK(testScenario(findFaultCase(sim::Config::ATank, "stable")).seed == kStableSeed);
  CHECK(testScenario(findFaultCase(sim::Config::ATank, "pumpSlow")).seed == kFaultSeed);
  CHECK(trainingScenario(sim::Config::ATank).seed == kTrainSeed);
}

TEST_CASE("detect: schema and label checks, report shape") {
  const auto train = sim::run(trainingScenario(sim::Config::ATank));
  const auto test = sim::runDetailed(testScenario(findFaultCase(sim::Config::ATank, "valve0Block")));
  const auto res = detect(train, test.data, test.labels, knnKdeBackend());
  CHECK(res.staticScores.size() == test.data.size());
  CHECK(res.dynamicScores.size() == test.data.size() - kWindow + 1);
  CHECK(res.dynamicReport.mode == "dynamic");
  CHECK(res.staticReport.mode == "static");
  REQUIRE(res.dynamicReport.auc.has_value());
  CHECK(*res.dynamicReport.auc >= 0.0);
  CHECK(*res.dynamicReport.auc <= 1.0);

  const auto other = sim::runDetailed(testScenario(findFaultCase(sim::Config::FourTanks, "stable")));
  CHECK(codeOf([&] { detect(train, other.data, other.labels, knnKdeBackend()); }) == Errc::SchemaMismatch);
  const std::vector<sim::Label> shortLabels(test.labels.begin(), test.labels.begin() + 5);
  CHECK(codeOf([&] { detect(train, test.data, shortLabels, knnKdeBackend()); }) == Errc::SchemaMismatch);
  CHECK(codeOf([&] { detect(train, test.data, test.labels, knnKdeBackend(), 1); }) == Errc::WindowTooShort);
  CHECK(inferConfig(train.schema()) == sim::Config::ATank);
  CHECK_FALSE(inferConfig(SignalSchema::fromNames({"q"})).has_value());
}

TEST_CASE("runScenario writes artifacts and reruns identically") {
  const auto dir = scratch("run");
  const auto sc = sim::loadScenarioFile(scenarioPath("4_tanks_pipe4_jam"));
  runScenario(sc, dir / "a", "4_tanks_pipe4_jam");
  for (const char* f : {"data.csv", "labels.csv", "manifest.json"}) CHECK(fs::exists(dir / "a" / f));
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest.at("seed").get<std::uint64_t>() == sc.seed);
  CHECK(manifest.at("config").get<std::string>() == "4_tanks");
  CHECK(manifest.at("faults").at(0).at("component").get<std::string>() == "v4");

  runScenario(sc, dir / "b", "4_tanks_pipe4_jam");
  CHECK(slurp(dir / "a" / "data.csv") == slurp(dir / "b" / "data.csv"));

  const auto loaded = loadRun(dir / "a");
  CHECK(loaded.data.size() == loaded.labels.size());
  CHECK(formatScenario(loaded.scenario) == formatScenario(sc));
  CHECK(codeOf([&] { loadRun(dir / "missing"); }) == Errc::IoError);
}

TEST_CASE("malformed scenario file reports its line") {
  const auto dir = scratch("bad");
  spit(dir / "bad.scn", "config = 4_tanks\nseed = 3\nduration = soon\n");
  try {
    sim::loadScenarioFile((dir / "bad.scn").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("cli: simulate, detect, report") {
  const auto dir = scratch("cli_detect");
  auto r = cli("simulate \"" + scenarioPath("4_tanks_train") + "\" -o \"" + (dir / "train").string() + "\"", dir);
  REQUIRE(r.exitCode == 0);
  r = cli("simulate \"" + scenarioPath("4_tanks_pipe4_jam") + "\" -o \"" + (dir / "jam").string() + "\"", dir);
  REQUIRE(r.exitCode == 0);
  r = cli("detect \"" + (dir / "train/data.csv").string() + "\" \"" + (dir / "jam/data.csv").string() + "\" \"" +
              (dir / "jam/labels.csv").string() + "\" --backend knn-kde -o \"" + (dir / "eval").string() + "\"",
          dir);
  CHECK(r.exitCode == 0);
  const auto dyn = reportFromJson(slurp(dir / "eval/eval_dynamic.json"));
  CHECK(dyn.fault == "pipeJam");
  REQUIRE(dyn.auc.has_value());
  CHECK(*dyn.auc >= 0.90);
  r = cli("report \"" + (dir / "eval").string() + "\"", dir);
  CHECK(r.exitCode == 0);
  CHECK(fs::exists(dir / "eval/report.txt"));

  r = cli("simulate \"" + scenarioPath("a_tank_train") + "\" -o \"" + (dir / "one").string() + "\"", dir);
  REQUIRE(r.exitCode == 0);
  r = cli("detect \"" + (dir / "train/data.csv").string() + "\" \"" + (dir / "one/data.csv").string() + "\" \"" +
              (dir / "one/labels.csv").string() + "\"",
          dir);
  CHECK(r.exitCode == 2);
  CHECK(r.out.find("SchemaMismatch") != std::string::npos);

  spit(dir / "broken.scn", "config = 4_tanks\nbogus\n");
  r = cli("simulate \"" + (dir / "broken.scn").string() + "\" -o \"" + (dir / "x").string() + "\"", dir);
  CHECK(r.exitCode == 2);
  CHECK(r.out.find("line 2") != std::string::npos);
  r = cli("simulate /nonexistent/file.scn", dir);
  CHECK(r.exitCode == 4);
  r = cli("frobnicate", dir);
  CHECK(r.exitCode == 2);
}

TEST_CASE("cli: model and diagnose") {
  const auto dir = scratch("cli_diag");
  REQUIRE(cli("model 4_tanks -o \"" + (dir / "model").string() + "\"", dir).exitCode == 0);
  const auto rules = (dir / "model/rules.txt").string();
  const auto bindings = (dir / "model/bindings.txt").string();
  const auto model = (dir / "model/model.def").string();

  spit(dir / "block.scn", "config = 4_tanks\nseed = 3\nduration = 200\nfault = v0 valveBlock 100\n");
  REQUIRE(cli("simulate \"" + (dir / "block.scn").string() + "\" -o \"" + (dir / "block").string() + "\"", dir)
              .exitCode == 0);
  REQUIRE(cli("simulate \"" + scenarioPath("4_tanks_stable") + "\" -o \"" + (dir / "stable").string() + "\"", dir)
              .exitCode == 0);

  auto r = cli("diagnose \"" + rules + "\" \"" + (dir / "stable").string() + "\" \"" + bindings + "\" --model \"" +
                   model + "\" -o \"" + (dir / "stable.txt").string() + "\"",
               dir);
  CHECK(r.exitCode == 0);
  const auto stableText = slurp(dir / "stable.txt");
  CHECK(stableText.find("consistent_with_all_ok = false") == std::string::npos);
  CHECK(stableText.find("diagnosis = {}") != std::string::npos);

  r = cli("diagnose \"" + rules + "\" \"" + (dir / "block").string() + "\" \"" + bindings + "\" --at 50 120", dir);
  CHECK(r.exitCode == 0);
  const auto second = r.out.substr(r.out.find("t = 120"));
  CHECK(second.find("diagnosis = {v0}") != std::string::npos);

  spit(dir / "bad_bindings.txt", "v0_flow_nominal = no_such_concept\n");
  r = cli("diagnose \"" + rules + "\" \"" + (dir / "block").string() + "\" \"" + (dir / "bad_bindings.txt").string() +
              "\"",
          dir);
  CHECK(r.exitCode == 2);
  CHECK(r.out.find("DanglingReference") != std::string::npos);
}

TEST_CASE("cli: plan") {
  const auto dir = scratch("cli_plan");
  spit(dir / "steps.def",
       "product raw, blank, part\n"
       "step cut: raw -> blank | ok: saw\n"
       "step mill: blank -> part | ok: mill\n");
  auto r = cli("plan \"" + (dir / "steps.def").string() + "\" raw:1 part:1", dir);
  CHECK(r.exitCode == 0);
  CHECK(r.out == "cut\nmill\n");
  r = cli("plan \"" + (dir / "steps.def").string() + "\" raw:1 part:1 --available saw", dir);
  CHECK(r.exitCode == 3);
  CHECK(r.out.find("NoPlanFound") != std::string::npos);
  r = cli("plan \"" + (dir / "steps.def").string() + "\" raw:0 part", dir);
  CHECK(r.exitCode == 2);
}

TEST_CASE("cli: five-step chain matches the exhaustive optimum") {
  const auto dir = scratch("cli_chain");
  std::mt19937_64 rng(72);
  std::size_t checked = 0;
  for (int trial = 0; trial < 20000 && checked < 5; ++trial) {
    auto inst = oracle::randomPlanningInstance(rng, 5);
    if (inst.steps.size() != 5) continue;
    const auto best = oracle::optimalPlanLength(inst.steps, inst.initial, inst.goal, inst.available, 6);
    if (!best || *best < 2) continue;
    std::string defs = "product a, b, c, d, e\n";
    for (const auto& s : inst.steps) {
      defs += "step " + s.name + ": ";
      for (std::size_t k = 0; k < s.inputs.size(); ++k) defs += (k ? ", " : "") + s.inputs[k];
      defs += " -> ";
      for (std::size_t k = 0; k < s.outputs.size(); ++k) defs += (k ? ", " : "") + s.outputs[k];
      if (!s.ok.empty()) defs += " | ok: " + *s.ok.begin();
      defs += "\n";
    }
    spit(dir / "steps.def", defs);
    std::string avail;
    for (const auto& m : inst.available) avail += (avail.empty() ? "" : ",") + m;
    const auto r = cli("plan \"" + (dir / "steps.def").string() + "\" \"" + bare(inst.initial) +
                           "\" \"" + bare(inst.goal) + "\" --max-depth 6 --available \"" +
                           (avail.empty() ? "none" : avail) + "\"",
                       dir);
    CHECK(r.exitCode == 0);
    CHECK(static_cast<std::size_t>(std::count(r.out.begin(), r.out.end(), '\n')) == *best);
    ++checked;
  }
  CHECK(checked == 5);
}
