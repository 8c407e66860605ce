#pragma once

// The digital twin facade: one object holding the synchronized data store,
// the component registry, the fitted prediction backend and the causal model.

#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "aitwin/causality.hpp"
#include "aitwin/component.hpp"
#include "aitwin/data_model.hpp"
#include "aitwin/prediction.hpp"
#include "aitwin/simulator.hpp"

namespace aitwin {

class Twin {
 public:
  Twin(SignalSchema schema, std::vector<Component> comps, BackendFactory factory);

  const SignalSchema& schema() const noexcept { return data_.schema(); }
  /// Registered components in registration order.
  const std::vector<Component>& getComps() const noexcept { return *comps_; }
  std::vector<std::string> componentIds() const;

  DataStore& data() noexcept { return data_; }
  const DataStore& data() const noexcept { return data_; }
  CausalModel& causality() noexcept { return causal_; }
  const CausalModel& causality() const noexcept { return causal_; }

  /// Fits the backend; sessions created earlier keep their previous model.
  /// Throws EmptyHistory / NonMonotonicTime / SchemaMismatch.
  void fitBackend(std::span<const Sample> history);
  bool fitted() const;
  std::shared_ptr<const FittedModel> model() const;

  /// A new handle over the current fitted model with no failures set.
  Session session() const;

 private:
  std::shared_ptr<const std::vector<Component>> comps_;
  BackendFactory factory_;
  DataStore data_;
  CausalModel causal_;
  mutable std::mutex modelMutex_;
  std::shared_ptr<const FittedModel> model_;
};

/// Backend by name ("knn-kde" | "physics"). Throws InvalidScenario.
BackendFactory makeBackend(std::string_view name, const sim::Topology& topology,
                           std::vector<sim::OpeningCommand> commands = {});

/// Twin for the scenario's topology and backend; data and model empty.
Twin makeTwin(const sim::Scenario& scenario);

}  // namespace aitwin
