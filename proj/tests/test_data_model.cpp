#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>
#include <thread>

#include "aitwin/data_model.hpp"
#include "aitwin/error.hpp"
#include "aitwin/simulator.hpp"

using namespace aitwin;

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

DataStore twoSignals() { return DataStore(SignalSchema::fromNames({"x0", "x1"})); }

}  // namespace

TEST_CASE("schema rejects duplicate and empty names") {
  CHECK(codeOf([] { SignalSchema::fromNames({"a", "a"}); }) == Errc::SchemaMismatch);
  CHECK(codeOf([] { SignalSchema::fromNames({"a", ""}); }) == Errc::SchemaMismatch);
  auto s = SignalSchema::fromNames({"a", "b", "c"});
  CHECK(s.size() == 3);
  CHECK(s.indexOf("c") == 2u);
  CHECK_FALSE(s.indexOf("d").has_value());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i].index == i);
}

TEST_CASE("ingest: first insert, boundary equality, schema checks") {
  auto store = twoSignals();
  store.ingest({0.0, {0.0, 0.0}});
  CHECK(store.size() == 1);

  store.ingest({1.0, {1.0, 2.0}});
  CHECK(codeOf([&] { store.ingest({1.0, {5.0, 5.0}}); }) == Errc::NonMonotonicTime);
  CHECK(codeOf([&] { store.ingest({0.5, {5.0, 5.0}}); }) == Errc::NonMonotonicTime);
  CHECK(codeOf([&] { store.ingest({2.0, {5.0}}); }) == Errc::SchemaMismatch);
  CHECK(store.size() == 2);
  CHECK(store.getData(1.0) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("simulator samples ingest in order") {
  sim::Scenario sc;
  sc.config = sim::Config::ATank;
  sc.duration = 500.0;
  sc.dt = 0.5;
  auto store = sim::run(sc);
  CHECK(store.size() == 1000);
  CHECK(store.timeRange() == std::pair<double, double>{0.0, 999 * 0.5});

  sc.duration = 600.0;
  sc.dt = 1.0;
  CHECK(sim::run(sc).timeRange() == std::pair<double, double>{0.0, 599.0});
}

TEST_CASE("getData: exact hit, midpoint, out of range") {
  auto store = twoSignals();
  store.ingest({0.0, {2.0, -1.0}});
  store.ingest({1.0, {4.0, 3.0}});
  CHECK(store.getData(0, 0.0) == 2.0);
  CHECK(store.getData(0, 0.5) == 3.0);
  CHECK(store.getData(0.5) == std::vector<double>{3.0, 1.0});
  CHECK(codeOf([&] { store.getData(0, 2.0); }) == Errc::TimeOutOfRange);
  CHECK(codeOf([&] { store.getData(-0.1); }) == Errc::TimeOutOfRange);
  CHECK(codeOf([&] { store.getData(2, 0.5); }) == Errc::IndexOutOfRange);
  CHECK(codeOf([] { twoSignals().getData(0.0); }) == Errc::EmptyStore);
  CHECK(codeOf([] { twoSignals().timeRange(); }) == Errc::EmptyStore);
}

TEST_CASE("getData within the exact-hit tolerance returns the stored vector") {
  auto store = twoSignals();
  store.ingest({0.0, {0.1, 0.2}});
  store.ingest({1.0, {0.7, 0.9}});
  CHECK(store.getData(1.0 - 0.5e-9) == std::vector<double>{0.7, 0.9});
  CHECK(store.getData(0.5e-9) == std::vector<double>{0.1, 0.2});
}

TEST_CASE("timeRange of singleton and ordered stores") {
  auto store = twoSignals();
  store.ingest({5.0, {1.0, 1.0}});
  CHECK(store.timeRange() == std::pair<double, double>{5.0, 5.0});
  auto ten = twoSignals();
  for (int t = 0; t < 10; ++t) ten.ingest({double(t), {double(t), 0.0}});
  CHECK(ten.timeRange() == std::pair<double, double>{0.0, 9.0});
}

TEST_CASE("property: interpolation is exact on affine signals") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a0 = u(rng), b0 = u(rng), a1 = u(rng), b1 = u(rng);
    auto store = twoSignals();
    double t = 0.0;
    for (int k = 0; k < 30; ++k) {
      store.ingest({t, {a0 + b0 * t, a1 + b1 * t}});
      t += 0.1 + std::abs(u(rng));
    }
    const auto [lo, hi] = store.timeRange();
    std::uniform_real_distribution<double> q(lo, hi);
    for (int k = 0; k < 100; ++k) {
      const double tq = q(rng);
      const auto x = store.getData(tq);
      CHECK(std::abs(x[0] - (a0 + b0 * tq)) <= 1e-9);
      CHECK(std::abs(x[1] - (a1 + b1 * tq)) <= 1e-9);
      CHECK(store.getData(1, tq) == x[1]);
    }
  }
}

TEST_CASE("property: stored timestamps return stored vectors bitwise") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  auto store = twoSignals();
  std::vector<Sample> kept;
  double t = 0.0;
  for (int k = 0; k < 200; ++k) {
    Sample s{t, {n(rng), n(rng)}};
    store.ingest(s);
    kept.push_back(s);
    t += std::abs(n(rng)) + 1e-3;
  }
  for (const auto& s : kept) {
    CHECK(store.getData(s.at) == s.x);
    for (std::size_t i = 0; i < 2; ++i) CHECK(store.getData(i, s.at) == s.x[i]);
  }
}

TEST_CASE("property: rejected ingests leave the store unchanged") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  auto store = twoSignals();
  store.ingest({5.0, {1.0, 1.0}});
  for (int k = 0; k < 200; ++k) {
    const double t = u(rng);
    const auto before = store.samples();
    try {
      store.ingest({t, {t, t}});
      CHECK(t > before.back().at);
    } catch (const TwinError& e) {
      CHECK(e.code() == Errc::NonMonotonicTime);
      CHECK(store.samples().size() == before.size());
    }
  }
}

TEST_CASE("CSV round trip is bitwise") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n(0.0, 1e3);
  DataStore store(SignalSchema::fromNames({"flow", "level", "x"}));
  for (int k = 0; k < 100; ++k) store.ingest({k * 0.1, {n(rng), n(rng) * 1e-12, n(rng) * 1e17}});
  std::stringstream ss;
  saveCsv(store, ss);
  CHECK(ss.str().rfind("t,flow,level,x\n", 0) == 0);
  auto back = loadCsv(ss);
  CHECK(back.schema() == store.schema());
  const auto a = store.samples();
  const auto b = back.samples();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].at == b[k].at);
    CHECK(a[k].x == b[k].x);
  }
}

TEST_CASE("CSV errors carry the line number") {
  std::stringstream bad("t,a,b\n0,1,2\n1,1\n");
  try {
    loadCsv(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::stringstream noT("x,a\n0,1\n");
  CHECK(codeOf([&] { loadCsv(noT); }) == Errc::ParseError);
  std::stringstream backwards("t,a\n1,1\n0,1\n");
  CHECK(codeOf([&] { loadCsv(backwards); }) == Errc::ParseError);
  CHECK(codeOf([] { loadCsvFile("/nonexistent/dir/file.csv"); }) == Errc::IoError);
}

TEST_CASE("partial vectors") {
  SignalVector v{1.0, std::nullopt};
  CHECK_FALSE(isComplete(v));
  CHECK(codeOf([&] { requireComplete(v); }) == Errc::IncompleteVector);
  v[1] = 2.0;
  CHECK(requireComplete(v) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("concurrent readers observe consistent snapshots") {
  DataStore store(SignalSchema::fromNames({"a", "b"}));
  store.ingest({0.0, {0.0, 0.0}});
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r)
    readers.emplace_back([&] {
      while (!stop) {
        for (const auto& s : store.samples())
          if (s.x[0] != s.at || s.x[1] != -s.at) ++bad;
        const auto [lo, hi] = store.timeRange();
        const auto x = store.getData(hi);
        if (x[0] != hi) ++bad;
        (void)lo;
      }
    });
  for (int k = 1; k <= 2000; ++k) store.ingest({double(k), {double(k), -double(k)}});
  stop = true;
  for (auto& t : readers) t.join();
  CHECK(bad == 0);
  CHECK(store.size() == 2001);
}
