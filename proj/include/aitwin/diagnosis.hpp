#pragma once

// Consistency-based diagnosis with weak fault models. A rule
//   OK(c1) & ... & OK(ck) -> (a1 & ... & am => q1 & ... & ql)
// constrains the predicates only while every guarded component is OK.

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "aitwin/causality.hpp"
#include "aitwin/data_model.hpp"

namespace aitwin {

struct StatePredicate {
  std::string id;
  std::string meaning;
};

struct GuardedRule {
  std::set<std::string> okGuard;
  std::set<std::string> antecedent;  // empty = unconditional
  std::set<std::string> consequent;  // non-empty
};

class ObservationSet {
 public:
  ObservationSet() = default;
  /// Throws ContradictoryObservation when a predicate is in both sets.
  ObservationSet(std::set<std::string> asTrue, std::set<std::string> asFalse);

  const std::set<std::string>& asTrue() const noexcept { return asTrue_; }
  const std::set<std::string>& asFalse() const noexcept { return asFalse_; }
  void observe(const std::string& predicate, bool value);

 private:
  std::set<std::string> asTrue_;
  std::set<std::string> asFalse_;
};

struct Diagnosis {
  std::set<std::string> suspects;

  friend bool operator==(const Diagnosis&, const Diagnosis&) = default;
};

/// Guard-size limit for diagnose().
inline constexpr std::size_t kMaxDiagnosisComponents = 20;

/// Predicates derivable from obs.asTrue under the rules not guarded by a failed component.
std::set<std::string> closure(const std::vector<GuardedRule>& rules, const std::set<std::string>& facts,
                              const std::set<std::string>& failed);

/// True iff forward chaining never derives a predicate observed false.
bool isConsistent(const std::vector<GuardedRule>& rules, const ObservationSet& obs, const std::set<std::string>& failed);

/// All consistent suspect sets of minimal cardinality, each sorted, list sorted
/// lexicographically; [{}] when all-OK is consistent, [] when nothing is.
/// Throws DanglingReference (guard outside comps) / SizeLimitExceeded.
std::vector<Diagnosis> diagnose(const std::vector<GuardedRule>& rules, const ObservationSet& obs,
                                const std::set<std::string>& comps);

/// Predicate -> concept name.
using PredicateBindings = std::map<std::string, std::string>;

/// Marks each bound predicate true iff getData(t) lies in its concept.
/// Throws TimeOutOfRange / DanglingReference.
ObservationSet observationsFromTwin(const DataStore& data, const CausalModel& model, Timestamp t,
                                    const PredicateBindings& bindings);

/// Every predicate referenced by the rules, in id order, with meanings from bindings.
std::vector<StatePredicate> predicatesOf(const std::vector<GuardedRule>& rules, const PredicateBindings& bindings = {});

/// Rule file: one rule per line, `#` comments,
///   OK(a)&OK(b) -> s1 & s2 => s3 & s4
/// The guard part (and its `->`) may be omitted; an empty antecedent or `true`
/// makes the rule unconditional.
std::vector<GuardedRule> parseRules(std::istream& in);
std::vector<GuardedRule> loadRulesFile(const std::string& path);
std::string formatRule(const GuardedRule& rule);

/// Bindings file: `predicate = concept` per line.
PredicateBindings parseBindings(std::istream& in);
PredicateBindings loadBindingsFile(const std::string& path);

/// Structured text: time, consistency with all-OK, cardinality, one suspect set per line.
std::string formatDiagnosisReport(Timestamp t, const ObservationSet& obs, const std::vector<Diagnosis>& diagnoses);

}  // namespace aitwin
