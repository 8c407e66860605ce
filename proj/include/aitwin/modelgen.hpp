#pragma once

// Causal and diagnostic models derived from a tank topology. All bands are
// relative to the fault-free steady state.
//
// Concepts: `<signal>_nominal` (within kNominalBand of steady state), and per
// tank `<tank>_filling` / `<tank>_full` (level below / above kFullFraction * hMax).
// Events: `<tank>_high`, the halfspace below kFullFraction * hMax; crossing its
// boundary moves a tank between filling and full (`<tank>_fills_up`, guarded by
// the tank and its inlet valves). Every nominal concept persists while the
// components feeding it are OK (`<signal>_holds`).
// Diagnosis rules, one per component group:
//   source valve v:  OK(pump) & OK(v)            ->          => v_flow_nominal
//   valve v from t:  OK(v)                       -> t_level_nominal => v_flow_nominal
//   tank t:          OK(t) & OK(outlets of t)    -> inlets nominal  => t_level_nominal

#include <set>
#include <string>
#include <vector>

#include "aitwin/causality.hpp"
#include "aitwin/diagnosis.hpp"
#include "aitwin/simulator.hpp"

namespace aitwin {

inline constexpr double kNominalBand = 0.10;
inline constexpr double kFullFraction = 0.95;

struct GeneratedModel {
  CausalModel causal;
  std::vector<GuardedRule> rules;
  PredicateBindings bindings;  // predicate id = concept name
  std::set<std::string> components;
};

GeneratedModel generateModel(const sim::Topology& topology);

}  // namespace aitwin
