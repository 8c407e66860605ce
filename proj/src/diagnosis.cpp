#include "aitwin/diagnosis.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "aitwin/error.hpp"
#include "text_util.hpp"

namespace aitwin {

ObservationSet::ObservationSet(std::set<std::string> asTrue, std::set<std::string> asFalse)
    : asTrue_(std::move(asTrue)), asFalse_(std::move(asFalse)) {
  for (const auto& p : asTrue_)
    if (asFalse_.contains(p)) throw TwinError(Errc::ContradictoryObservation, "'" + p + "' observed both true and false");
}

void ObservationSet::observe(const std::string& predicate, bool value) {
  auto& other = value ? asFalse_ : asTrue_;
  if (other.contains(predicate))
    throw TwinError(Errc::ContradictoryObservation, "'" + predicate + "' observed both true and false");
  (value ? asTrue_ : asFalse_).insert(predicate);
}

namespace {

bool guardRetracted(const GuardedRule& r, const std::set<std::string>& failed) {
  return std::any_of(r.okGuard.begin(), r.okGuard.end(), [&](const std::string& c) { return failed.contains(c); });
}

}  // namespace

std::set<std::string> closure(const std::vector<GuardedRule>& rules, const std::set<std::string>& facts,
                              const std::set<std::string>& failed) {
  std::set<std::string> known = facts;
  std::vector<const GuardedRule*> pending;
  for (const auto& r : rules)
    if (!guardRetracted(r, failed)) pending.push_back(&r);
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = pending.begin(); it != pending.end();) {
      const auto& r = **it;
      if (std::all_of(r.antecedent.begin(), r.antecedent.end(), [&](const std::string& a) { return known.contains(a); })) {
        known.insert(r.consequent.begin(), r.consequent.end());
        it = pending.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  return known;
}

bool isConsistent(const std::vector<GuardedRule>& rules, const ObservationSet& obs, const std::set<std::string>& failed) {
  const auto derived = closure(rules, obs.asTrue(), failed);
  return std::none_of(obs.asFalse().begin(), obs.asFalse().end(),
                      [&](const std::string& p) { return derived.contains(p); });
}

std::vector<Diagnosis> diagnose(const std::vector<GuardedRule>& rules, const ObservationSet& obs,
                                const std::set<std::string>& comps) {
  for (const auto& r : rules)
    for (const auto& c : r.okGuard)
      if (!comps.contains(c)) throw TwinError(Errc::DanglingReference, "rule guard names unknown component '" + c + "'");
  if (comps.size() > kMaxDiagnosisComponents)
    throw TwinError(Errc::SizeLimitExceeded, std::to_string(comps.size()) + " components exceed the limit of " +
                                                 std::to_string(kMaxDiagnosisComponents));

  const std::vector<std::string> ids(comps.begin(), comps.end());
  const std::size_t n = ids.size();
  std::vector<Diagnosis> found;
  for (std::size_t size = 0; size <= n && found.empty(); ++size) {
    // Combinations of `size` indices in lexicographic order.
    std::vector<std::size_t> pick(size);
    for (std::size_t k = 0; k < size; ++k) pick[k] = k;
    while (true) {
      std::set<std::string> failed;
      for (auto k : pick) failed.insert(ids[k]);
      if (isConsistent(rules, obs, failed)) found.push_back({std::move(failed)});
      std::size_t k = size;
      while (k > 0 && pick[k - 1] == n - size + (k - 1)) --k;
      if (k == 0) break;
      ++pick[k - 1];
      for (std::size_t m = k; m < size; ++m) pick[m] = pick[m - 1] + 1;
    }
  }
  return found;
}

ObservationSet observationsFromTwin(const DataStore& data, const CausalModel& model, Timestamp t,
                                    const PredicateBindings& bindings) {
  std::vector<std::pair<std::string, ConceptId>> resolved;
  for (const auto& [pred, conceptName] : bindings) {
    auto id = model.findConcept(conceptName);
    if (!id) throw TwinError(Errc::DanglingReference, "predicate '" + pred + "' bound to unknown concept '" + conceptName + "'");
    resolved.emplace_back(pred, *id);
  }
  const auto x = data.getData(t);
  const auto inside = model.getConcepts(std::span<const double>(x));
  ObservationSet obs;
  for (const auto& [pred, id] : resolved) obs.observe(pred, std::find(inside.begin(), inside.end(), id) != inside.end());
  return obs;
}

std::vector<StatePredicate> predicatesOf(const std::vector<GuardedRule>& rules, const PredicateBindings& bindings) {
  std::set<std::string> ids;
  for (const auto& r : rules) {
    ids.insert(r.antecedent.begin(), r.antecedent.end());
    ids.insert(r.consequent.begin(), r.consequent.end());
  }
  std::vector<StatePredicate> out;
  for (const auto& id : ids) {
    auto b = bindings.find(id);
    out.push_back({id, b == bindings.end() ? std::string() : "in concept " + b->second});
  }
  return out;
}

namespace {

std::set<std::string> parseConjunction(std::string_view text, std::size_t line) {
  std::set<std::string> out;
  const auto t = detail::trim(text);
  if (t.empty() || t == "true") return out;
  for (auto& atom : detail::split(t, '&')) {
    auto a = std::string(detail::trim(atom));
    if (!detail::isIdentifier(a)) throw ParseError(line, "invalid predicate '" + a + "'");
    out.insert(a);
  }
  return out;
}

std::set<std::string> parseGuard(std::string_view text, std::size_t line) {
  std::set<std::string> out;
  const auto t = detail::trim(text);
  if (t.empty() || t == "true") return out;
  for (auto& atom : detail::split(t, '&')) {
    auto a = detail::trim(atom);
    if (a.size() < 4 || a.substr(0, 3) != "OK(" || a.back() != ')')
      throw ParseError(line, "expected OK(<component>), got '" + std::string(a) + "'");
    auto id = std::string(detail::trim(a.substr(3, a.size() - 4)));
    if (!detail::isIdentifier(id)) throw ParseError(line, "invalid component id '" + id + "'");
    out.insert(id);
  }
  return out;
}

}  // namespace

std::vector<GuardedRule> parseRules(std::istream& in) {
  std::vector<GuardedRule> rules;
  std::string raw;
  std::size_t lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    auto line = detail::trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto implies = line.find("=>");
    if (implies == std::string_view::npos) throw ParseError(lineNo, "expected '=>'");
    auto head = line.substr(0, implies);
    GuardedRule r;
    auto arrow = head.find("->");
    if (arrow != std::string_view::npos) {
      r.okGuard = parseGuard(head.substr(0, arrow), lineNo);
      head = head.substr(arrow + 2);
    }
    r.antecedent = parseConjunction(head, lineNo);
    r.consequent = parseConjunction(line.substr(implies + 2), lineNo);
    if (r.consequent.empty()) throw ParseError(lineNo, "rule has an empty consequent");
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<GuardedRule> loadRulesFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path);
  return parseRules(in);
}

std::string formatRule(const GuardedRule& rule) {
  auto join = [](const std::set<std::string>& s, const char* sep) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : sep) + x;
    return out;
  };
  std::string guard;
  for (const auto& c : rule.okGuard) guard += (guard.empty() ? "OK(" : "&OK(") + c + ")";
  const auto ante = rule.antecedent.empty() ? std::string("true") : join(rule.antecedent, " & ");
  return guard + (guard.empty() ? "-> " : " -> ") + ante + " => " + join(rule.consequent, " & ");
}

PredicateBindings parseBindings(std::istream& in) {
  PredicateBindings out;
  std::string raw;
  std::size_t lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    auto line = detail::trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(lineNo, "expected '<predicate> = <concept>'");
    auto pred = std::string(detail::trim(line.substr(0, eq)));
    auto concept_ = std::string(detail::trim(line.substr(eq + 1)));
    if (!detail::isIdentifier(pred) || !detail::isIdentifier(concept_)) throw ParseError(lineNo, "invalid binding");
    if (!out.emplace(pred, concept_).second) throw ParseError(lineNo, "predicate '" + pred + "' bound twice");
  }
  return out;
}

PredicateBindings loadBindingsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path);
  return parseBindings(in);
}

std::string formatDiagnosisReport(Timestamp t, const ObservationSet& obs, const std::vector<Diagnosis>& diagnoses) {
  std::ostringstream out;
  const bool nominal = diagnoses.size() == 1 && diagnoses.front().suspects.empty();
  out << "t = " << formatReal(t) << '\n';
  out << "observed_true = " << obs.asTrue().size() << '\n';
  out << "observed_false = " << obs.asFalse().size() << '\n';
  out << "consistent_with_all_ok = " << (nominal ? "true" : "false") << '\n';
  if (diagnoses.empty()) {
    out << "cardinality = none\n";
    return out.str();
  }
  out << "cardinality = " << diagnoses.front().suspects.size() << '\n';
  for (const auto& d : diagnoses) {
    out << "diagnosis = {";
    bool first = true;
    for (const auto& c : d.suspects) {
      out << (first ? "" : ", ") << c;
      first = false;
    }
    out << "}\n";
  }
  return out.str();
}

}  // namespace aitwin
