#include "aitwin/planning.hpp"

#include <algorithm>
#include <deque>

#include "aitwin/error.hpp"
#include "text_util.hpp"

namespace aitwin {

ProductMultiset toMultiset(const std::vector<ProductId>& items) {
  ProductMultiset m;
  for (const auto& p : items) ++m[p];
  return m;
}

bool containsAll(const ProductMultiset& state, const ProductMultiset& required) {
  return std::all_of(required.begin(), required.end(), [&](const auto& kv) {
    auto it = state.find(kv.first);
    return it != state.end() && it->second >= kv.second;
  });
}

ProductMultiset applyStep(const ProductMultiset& state, const ProductCausality& step) {
  const auto in = toMultiset(step.inputs);
  if (!containsAll(state, in)) throw TwinError(Errc::InputsUnavailable, "step '" + step.name + "' lacks inputs");
  ProductMultiset next = state;
  for (const auto& [p, n] : in)
    if ((next[p] -= n) == 0) next.erase(p);
  for (const auto& p : step.outputs) ++next[p];
  return next;
}

Plan plan(const std::vector<ProductCausality>& steps, const ProductMultiset& initial, const ProductMultiset& goal,
          const std::set<std::string>& available, std::size_t maxDepth) {
  if (maxDepth < 1) throw TwinError(Errc::InvalidHorizon, "maxDepth must be at least 1");
  for (const auto& [p, n] : initial)
    if (n <= 0) throw TwinError(Errc::InputsUnavailable, "initial multiset has a non-positive count for '" + p + "'");
  if (containsAll(initial, goal)) return {};

  std::vector<const ProductCausality*> usable;
  for (const auto& s : steps)
    if (std::all_of(s.ok.begin(), s.ok.end(), [&](const std::string& c) { return available.contains(c); }))
      usable.push_back(&s);
  std::stable_sort(usable.begin(), usable.end(),
                   [](const ProductCausality* a, const ProductCausality* b) { return a->name < b->name; });

  // Level-order expansion in step-name order visits paths lexicographically,
  // so the first goal state generated ends the lexicographically least shortest plan.
  struct Node {
    ProductMultiset state;
    std::size_t parent;
    const ProductCausality* via;
    std::size_t depth;
  };
  std::vector<Node> nodes{{initial, 0, nullptr, 0}};
  std::set<ProductMultiset> seen{initial};
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    if (nodes[cur].depth >= maxDepth) continue;
    for (const auto* s : usable) {
      if (!containsAll(nodes[cur].state, toMultiset(s->inputs))) continue;
      auto next = applyStep(nodes[cur].state, *s);
      if (!seen.insert(next).second) continue;
      if (seen.size() > kMaxPlanStates) throw TwinError(Errc::SizeLimitExceeded, "planner state limit reached");
      nodes.push_back({std::move(next), cur, s, nodes[cur].depth + 1});
      const std::size_t id = nodes.size() - 1;
      if (containsAll(nodes[id].state, goal)) {
        Plan p;
        for (std::size_t k = id; k != 0; k = nodes[k].parent) p.steps.push_back(nodes[k].via->name);
        std::reverse(p.steps.begin(), p.steps.end());
        return p;
      }
      queue.push_back(id);
    }
  }
  throw TwinError(Errc::NoPlanFound, "goal " + formatMultiset(goal) + " unreachable within " + std::to_string(maxDepth) +
                                         " steps");
}

ProductMultiset parseMultiset(std::string_view text) {
  ProductMultiset m;
  for (auto& item : detail::splitTrimmed(text, ',')) {
    auto colon = item.find(':');
    std::string id(detail::trim(std::string_view(item).substr(0, colon)));
    long long n = 1;
    if (colon != std::string::npos) n = detail::parseInt(std::string_view(item).substr(colon + 1), 0);
    if (!detail::isIdentifier(id)) throw ParseError(0, "invalid product id '" + id + "'");
    if (n <= 0) throw ParseError(0, "count for '" + id + "' must be positive");
    m[id] += n;
  }
  return m;
}

std::string formatMultiset(const ProductMultiset& m) {
  std::string out = "{";
  for (const auto& [p, n] : m) out += (out.size() > 1 ? ", " : "") + p + ":" + std::to_string(n);
  return out + "}";
}

}  // namespace aitwin
