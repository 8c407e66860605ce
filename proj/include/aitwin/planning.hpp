#pragma once

// Breadth-first planning over product multisets. States are multisets of
// product ids; a step rewrites its inputs into its outputs.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aitwin/causality.hpp"

namespace aitwin {

/// Counts are always positive; absent ids have count zero.
using ProductMultiset = std::map<ProductId, long long>;

ProductMultiset toMultiset(const std::vector<ProductId>& items);
bool containsAll(const ProductMultiset& state, const ProductMultiset& required);

/// state - inputs + outputs. Throws InputsUnavailable.
ProductMultiset applyStep(const ProductMultiset& state, const ProductCausality& step);

struct Plan {
  std::vector<std::string> steps;  // step names, in execution order
};

/// Visited-state cap for plan().
inline constexpr std::size_t kMaxPlanStates = 1'000'000;

/// Shortest sequence of usable steps (OK guard within `available`) whose final
/// state contains `goal`; among equally short plans the lexicographically
/// smallest by step name. Event triggers are ignored.
/// Throws NoPlanFound / SizeLimitExceeded / InvalidHorizon (maxDepth < 1).
Plan plan(const std::vector<ProductCausality>& steps, const ProductMultiset& initial, const ProductMultiset& goal,
          const std::set<std::string>& available, std::size_t maxDepth);

/// `raw:2, blank` style literal; a bare id counts once. Throws ParseError.
ProductMultiset parseMultiset(std::string_view text);
std::string formatMultiset(const ProductMultiset& m);

}  // namespace aitwin
