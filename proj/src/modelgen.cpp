#include "aitwin/modelgen.hpp"

#include <algorithm>
#include <cmath>

namespace aitwin {

namespace {

LinearInequality below(std::size_t dim, std::size_t i, double bound) {
  LinearInequality h{std::vector<double>(dim, 0.0), bound};
  h.f[i] = 1.0;
  return h;
}

LinearInequality above(std::size_t dim, std::size_t i, double bound) {
  LinearInequality h{std::vector<double>(dim, 0.0), -bound};
  h.f[i] = -1.0;
  return h;
}

std::string nominal(const SignalSchema& schema, std::size_t i) { return schema[i].name + "_nominal"; }

}  // namespace

GeneratedModel generateModel(const sim::Topology& topo) {
  topo.validate();
  const auto schema = topo.schema();
  const std::size_t dim = schema.size();
  std::vector<std::string> compIds;
  for (const auto& c : topo.components()) compIds.push_back(c.id);

  GeneratedModel out{CausalModel(dim, compIds), {}, {}, {compIds.begin(), compIds.end()}};
  const sim::Plant plant(topo, {});
  const auto steady = sim::observe(plant.initialState(plant.steadyLevels(), 0.0, 1.0));

  for (std::size_t i = 0; i < dim; ++i) {
    const double half = std::max(kNominalBand * std::abs(steady[i]), 1e-3);
    out.causal.defineConcept({above(dim, i, steady[i] - half), below(dim, i, steady[i] + half)}, nominal(schema, i));
    out.bindings[nominal(schema, i)] = nominal(schema, i);
  }

  const std::size_t nv = topo.valves.size();
  for (std::size_t t = 0; t < topo.tanks.size(); ++t) {
    const auto& tank = topo.tanks[t];
    const std::size_t sig = topo.levelSignal(t);
    const double limit = kFullFraction * tank.hMax;
    const auto high = out.causal.defineEvent(below(dim, sig, limit), tank.id + "_high");
    const auto filling = out.causal.defineConcept({below(dim, sig, limit)}, tank.id + "_filling");
    const auto full = out.causal.defineConcept({above(dim, sig, limit)}, tank.id + "_full");
    std::set<std::string> ok{tank.id};
    for (std::size_t j = 0; j < nv; ++j)
      if (topo.valves[j].to == t) ok.insert(topo.valves[j].id);
    out.causal.addSystemCausality(
        {filling, high, full, {{"severity", "warning"}}, tank.id + "_fills_up", ok});
  }

  // Persistence: a nominal signal stays nominal while its feeding components are OK.
  for (std::size_t j = 0; j < nv; ++j) {
    const auto& v = topo.valves[j];
    std::set<std::string> ok{v.id};
    if (v.from)
      ok.insert(topo.tanks[*v.from].id);
    else
      ok.insert(topo.pumpId);
    const auto c = *out.causal.findConcept(nominal(schema, topo.flowSignal(j)));
    out.causal.addSystemCausality({c, std::nullopt, c, {}, v.id + "_flow_holds", ok});
  }
  for (std::size_t t = 0; t < topo.tanks.size(); ++t) {
    std::set<std::string> ok{topo.tanks[t].id};
    for (const auto& v : topo.valves)
      if (v.from == t || v.to == t) ok.insert(v.id);
    const auto c = *out.causal.findConcept(nominal(schema, topo.levelSignal(t)));
    out.causal.addSystemCausality({c, std::nullopt, c, {}, topo.tanks[t].id + "_level_holds", ok});
  }

  for (std::size_t j = 0; j < nv; ++j) {
    const auto& v = topo.valves[j];
    GuardedRule r;
    r.okGuard.insert(v.id);
    if (v.from)
      r.antecedent.insert(nominal(schema, topo.levelSignal(*v.from)));
    else
      r.okGuard.insert(topo.pumpId);
    r.consequent.insert(nominal(schema, topo.flowSignal(j)));
    out.rules.push_back(std::move(r));
  }
  for (std::size_t t = 0; t < topo.tanks.size(); ++t) {
    GuardedRule r;
    r.okGuard.insert(topo.tanks[t].id);
    for (std::size_t j = 0; j < nv; ++j) {
      if (topo.valves[j].from == t) r.okGuard.insert(topo.valves[j].id);
      if (topo.valves[j].to == t) r.antecedent.insert(nominal(schema, topo.flowSignal(j)));
    }
    r.consequent.insert(nominal(schema, topo.levelSignal(t)));
    out.rules.push_back(std::move(r));
  }
  return out;
}

}  // namespace aitwin
