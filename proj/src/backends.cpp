#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aitwin/error.hpp"
#include "aitwin/prediction.hpp"
#include "aitwin/simulator.hpp"

namespace aitwin {

namespace {

// ---------------------------------------------------------------------------
// k-nearest-neighbour completion

constexpr std::size_t kNeighbours = 5;

struct Neighbour {
  std::size_t index;
  double distance;
};

class KnnKdePredictor final : public Predictor {
 public:
  KnnKdePredictor(std::span<const Sample> history, const NormStats& stats)
      : stats_(stats), history_(history.begin(), history.end()), store_(schemaFor(history)) {
    z_.reserve(history_.size());
    for (const auto& s : history_) {
      z_.push_back(stats_.z(s.x));
      store_.ingest(s);
    }
  }

  std::string_view name() const override { return "knn-kde"; }
  bool honorsFailures() const override { return false; }

  PredictionResult predictStatic(const SignalVector& partial, const FailureAssignment& fa) const override {
    const std::size_t n = stats_.mean.size();
    if (!fa.empty()) return PredictionResult::allNull(n);
    std::vector<std::size_t> observed;
    std::vector<double> qz(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (partial[i]) {
        observed.push_back(i);
        qz[i] = (*partial[i] - stats_.mean[i]) / stats_.sd[i];
      }
    auto nb = nearest(qz, observed, z_.size(), std::nullopt);
    std::vector<std::vector<double>> values;
    for (const auto& v : nb) values.push_back(history_[v.index].x);
    return blend(nb, values);
  }

  PredictionResult predictDynamic(std::span<const Sample> window, double dt, const FailureAssignment& fa) const override {
    if (!fa.empty()) return PredictionResult::allNull(stats_.mean.size());
    return successorPrediction(window.back().x, dt, std::nullopt);
  }

  PredictionResult crossValidatedStep(std::span<const Sample> history, std::size_t j) const override {
    return successorPrediction(history[j].x, history[j + 1].at - history[j].at, j);
  }

 private:
  static SignalSchema schemaFor(std::span<const Sample> history) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < history.front().x.size(); ++i) names.push_back("s" + std::to_string(i));
    return SignalSchema::fromNames(names);
  }

  // k nearest among the first `limit` training points over the given coordinates.
  std::vector<Neighbour> nearest(const std::vector<double>& qz, const std::vector<std::size_t>& coords,
                                 std::size_t limit, std::optional<std::size_t> skip) const {
    std::vector<Neighbour> all;
    all.reserve(limit);
    for (std::size_t k = 0; k < limit; ++k) {
      if (skip && *skip == k) continue;
      double d2 = 0.0;
      for (std::size_t i : coords) {
        const double u = qz[i] - z_[k][i];
        d2 += u * u;
      }
      all.push_back({k, std::sqrt(d2)});
    }
    const std::size_t take = std::min(kNeighbours, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                      [](const Neighbour& a, const Neighbour& b) {
                        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
                      });
    all.resize(take);
    return all;
  }

  // Inverse-distance weighted mean; exact matches take all the weight.
  PredictionResult blend(const std::vector<Neighbour>& nb, const std::vector<std::vector<double>>& values) const {
    const std::size_t n = stats_.mean.size();
    if (nb.empty()) return PredictionResult::allNull(n);
    std::vector<double> w(nb.size());
    const bool exact = std::any_of(nb.begin(), nb.end(), [](const Neighbour& v) { return v.distance == 0.0; });
    for (std::size_t k = 0; k < nb.size(); ++k)
      w[k] = exact ? (nb[k].distance == 0.0 ? 1.0 : 0.0) : 1.0 / nb[k].distance;
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);

    PredictionResult r = PredictionResult::allNull(n);
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (std::size_t k = 0; k < nb.size(); ++k) mean += w[k] * values[k][i];
      mean /= wsum;
      double var = 0.0;
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const double u = (values[k][i] - mean) / stats_.sd[i];
        var += w[k] * u * u;
      }
      var /= wsum;
      r.x[i] = mean;
      r.p[i] = std::exp(-0.5 * var);
    }
    return r;
  }

  PredictionResult successorPrediction(std::span<const double> last, double dt, std::optional<std::size_t> skip) const {
    const std::size_t n = stats_.mean.size();
    const double horizonEnd = history_.back().at + kTimeEpsilon;
    std::size_t limit = 0;
    while (limit < history_.size() && history_[limit].at + dt <= horizonEnd) ++limit;
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    auto nb = nearest(stats_.z(last), coords, limit, skip);
    std::vector<std::vector<double>> succ;
    for (const auto& v : nb) succ.push_back(store_.getData(history_[v.index].at + dt));
    return blend(nb, succ);
  }

  NormStats stats_;
  std::vector<Sample> history_;
  std::vector<std::vector<double>> z_;
  DataStore store_;
};

// ---------------------------------------------------------------------------
// Physics: the plant model itself

constexpr double kLate = std::numeric_limits<double>::max();
constexpr double kDerived = 1.0;
constexpr double kAssumedSteady = 0.5;

class PhysicsPredictor final : public Predictor {
 public:
  PhysicsPredictor(sim::Topology topo, std::vector<sim::OpeningCommand> commands, double nominalStep)
      : topo_(std::move(topo)), commands_(std::move(commands)), nominalStep_(nominalStep) {}

  std::string_view name() const override { return "physics"; }
  bool honorsFailures() const override { return true; }

  PredictionResult predictStatic(const SignalVector& partial, const FailureAssignment& fa) const override {
    const auto plant = plantFor(fa, 0.0);
    const std::size_t nv = topo_.valves.size();
    const std::size_t nt = topo_.tanks.size();
    PredictionResult r = PredictionResult::allNull(nv + nt);

    std::optional<double> source;
    for (std::size_t j = 0; j < nv; ++j)
      if (!topo_.valves[j].from && partial[topo_.flowSignal(j)]) source = *partial[topo_.flowSignal(j)];
    const auto steady = plant.steadyLevels(source);

    std::vector<double> levels(nt);
    std::vector<double> levelConf(nt);
    for (std::size_t i = 0; i < nt; ++i) {
      if (auto given = partial[topo_.levelSignal(i)]) {
        levels[i] = *given;
        levelConf[i] = kDerived;
        continue;
      }
      levels[i] = steady[i];
      levelConf[i] = kAssumedSteady;
      if (plant.leakCoefficient(i, kLate) > 0.0) continue;
      for (std::size_t j = 0; j < nv; ++j) {
        const double c = plant.opening(j, kLate) * plant.effectiveK(j, kLate);
        if (topo_.valves[j].from == i && c > 0.0 && partial[topo_.flowSignal(j)]) {
          const double q = *partial[topo_.flowSignal(j)];
          levels[i] = (q / c) * (q / c);
          levelConf[i] = kDerived;
          break;
        }
      }
    }

    const auto q = plant.flows(levels, kLate, 0.0);
    for (std::size_t j = 0; j < nv; ++j) {
      const auto& v = topo_.valves[j];
      r.x[topo_.flowSignal(j)] = (!v.from && source) ? *source : q[j];
      r.p[topo_.flowSignal(j)] = v.from ? levelConf[*v.from] : kDerived;
    }
    for (std::size_t i = 0; i < nt; ++i) {
      r.x[topo_.levelSignal(i)] = levels[i];
      r.p[topo_.levelSignal(i)] = levelConf[i];
    }
    return r;
  }

  PredictionResult predictDynamic(std::span<const Sample> window, double dt, const FailureAssignment& fa) const override {
    const auto& last = window.back();
    const auto plant = plantFor(fa, window.front().at);
    const std::size_t nt = topo_.tanks.size();
    std::vector<double> levels(nt);
    for (std::size_t i = 0; i < nt; ++i) levels[i] = last.x[topo_.levelSignal(i)];

    const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / nominalStep_ - 1e-9)));
    const double h = dt / static_cast<double>(substeps);
    auto state = plant.initialState(levels, last.at, h);
    for (std::size_t k = 0; k < substeps; ++k) {
      const double nextT = k + 1 == substeps ? last.at + dt : state.t + h;
      state = plant.step(state, h, nullptr, nextT);
    }
    const auto x = sim::observe(state);
    PredictionResult r = PredictionResult::allNull(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.x[i] = x[i];
      r.p[i] = 1.0;
    }
    return r;
  }

 private:
  sim::Plant plantFor(const FailureAssignment& fa, Timestamp onset) const {
    std::vector<sim::Fault> faults;
    for (const auto& [id, modeName] : fa) {
      auto mode = sim::parseFaultMode(modeName);
      if (!mode) throw TwinError(Errc::UnknownMode, "physics backend does not model '" + modeName + "'");
      faults.push_back({id, *mode, onset, sim::defaultMagnitude(*mode)});
    }
    return sim::Plant(topo_, std::move(faults), commands_);
  }

  sim::Topology topo_;
  std::vector<sim::OpeningCommand> commands_;
  double nominalStep_;
};

double medianSpacing(std::span<const Sample> history) {
  if (history.size() < 2) return 1.0;
  std::vector<double> d;
  for (std::size_t k = 1; k < history.size(); ++k) d.push_back(history[k].at - history[k - 1].at);
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

}  // namespace

BackendFactory knnKdeBackend() {
  return [](std::span<const Sample> history, const NormStats& stats) -> std::shared_ptr<const Predictor> {
    return std::make_shared<KnnKdePredictor>(history, stats);
  };
}

BackendFactory physicsBackend(const sim::Topology& topology, std::vector<sim::OpeningCommand> commands) {
  topology.validate();
  return [topo = topology, cmds = std::move(commands)](std::span<const Sample> history,
                                                       const NormStats& stats) -> std::shared_ptr<const Predictor> {
    if (stats.mean.size() != topo.valves.size() + topo.tanks.size())
      throw TwinError(Errc::SchemaMismatch, "history does not match the plant's signal layout");
    return std::make_shared<PhysicsPredictor>(topo, cmds, medianSpacing(history));
  };
}

}  // namespace aitwin
