#include "aitwin/twin.hpp"

#include "aitwin/error.hpp"

namespace aitwin {

namespace {

std::vector<std::string> idsOf(const std::vector<Component>& comps) {
  std::vector<std::string> ids;
  ids.reserve(comps.size());
  for (const auto& c : comps) ids.push_back(c.id);
  return ids;
}

}  // namespace

Twin::Twin(SignalSchema schema, std::vector<Component> comps, BackendFactory factory)
    : comps_(std::make_shared<const std::vector<Component>>(std::move(comps))),
      factory_(std::move(factory)),
      data_(schema),
      causal_(schema.size(), idsOf(*comps_)) {
  validateComponents(*comps_);
}

std::vector<std::string> Twin::componentIds() const { return idsOf(*comps_); }

void Twin::fitBackend(std::span<const Sample> history) {
  for (const auto& s : history)
    if (s.x.size() != schema().size()) throw TwinError(Errc::SchemaMismatch, "history does not match the twin schema");
  auto fittedModel = FittedModel::fit(factory_, history);
  std::lock_guard lock(modelMutex_);
  model_ = std::move(fittedModel);
}

bool Twin::fitted() const { return model() != nullptr; }

std::shared_ptr<const FittedModel> Twin::model() const {
  std::lock_guard lock(modelMutex_);
  return model_;
}

Session Twin::session() const { return Session(model(), comps_, schema().size()); }

BackendFactory makeBackend(std::string_view name, const sim::Topology& topology,
                           std::vector<sim::OpeningCommand> commands) {
  if (name == "knn-kde") return knnKdeBackend();
  if (name == "physics") return physicsBackend(topology, std::move(commands));
  throw TwinError(Errc::InvalidScenario, "unknown backend '" + std::string(name) + "'");
}

Twin makeTwin(const sim::Scenario& scenario) {
  auto built = sim::buildScenario(scenario);
  return Twin(built.schema, built.components, makeBackend(scenario.backend, built.topology, scenario.commands));
}

}  // namespace aitwin
