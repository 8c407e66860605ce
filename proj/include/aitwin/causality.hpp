#pragma once

// Symbolic layer: events are open halfspaces f.x < c of the signal space,
// concepts (system states) are finite intersections of such halfspaces, and
// causalities are guarded transitions between concepts or product multisets.

#include <compare>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aitwin/data_model.hpp"

namespace aitwin {

class Session;

struct LinearInequality {
  std::vector<double> f;
  double c = 0.0;

  /// f.x - c; the inequality holds iff this is strictly negative.
  double slack(std::span<const double> x) const;
  bool holds(std::span<const double> x) const { return slack(x) < 0.0; }
  /// Throws ZeroCoefficientVector / SchemaMismatch.
  void validate(std::size_t dimension) const;
};

/// Parses strict linear (in)equalities over schema signal names.
///
///   expr  := ['-'] term (('+' | '-') term)*
///   term  := number '*' name | name '*' number | name | number
///   chain := expr ('<' | '>') expr [('<' | '>') expr]
///   text  := chain ('&' chain)*
///
/// `5.5 < x1 < 12.7` expands to two inequalities; `a > b` is stored as `-a < -b`.
std::vector<LinearInequality> parseInequalities(std::string_view text, const SignalSchema& schema);
/// Inverse of parseInequalities for a single inequality; exact for every double.
std::string formatInequality(const LinearInequality& ineq, const SignalSchema& schema);

struct EventId {
  std::size_t value = 0;
  auto operator<=>(const EventId&) const = default;
};

struct ConceptId {
  std::size_t value = 0;
  auto operator<=>(const ConceptId&) const = default;
};

using ProductId = std::string;
using Metadata = std::map<std::string, std::string>;

struct Event {
  EventId id;
  std::string name;
  LinearInequality hs;
};

struct Concept {
  ConceptId id;
  std::string name;
  std::vector<LinearInequality> region;

  bool contains(std::span<const double> x) const;
};

struct SystemCausality {
  ConceptId s1;
  std::optional<EventId> e;  // empty = immediate transition
  ConceptId s2;
  Metadata info;
  std::string name;
  std::set<std::string> ok;
};

struct ProductCausality {
  std::vector<ProductId> inputs;  // multiset, repeats allowed
  std::optional<EventId> e;
  std::vector<ProductId> outputs;
  Metadata info;
  std::string name;
  std::set<std::string> ok;
};

/// Registry of events, concepts, products and causalities. Definitions are
/// serialized; queries take a shared lock and return copies.
class CausalModel {
 public:
  /// `components` limits the ids allowed in OK guards; empty = unchecked.
  explicit CausalModel(std::size_t dimension, std::vector<std::string> components = {});
  CausalModel(const CausalModel& other);
  CausalModel& operator=(const CausalModel& other);

  std::size_t dimension() const noexcept { return dimension_; }

  EventId defineEvent(LinearInequality hs, std::string name);
  ConceptId defineConcept(std::vector<LinearInequality> region, std::string name);
  void defineProduct(ProductId id);
  void addSystemCausality(SystemCausality sc);
  void addProductCausality(ProductCausality pc);

  /// Events whose boundary is crossed on the segment x -> x2 (sign change of f.x - c,
  /// with zero counted outside).
  std::vector<EventId> getEvent(std::span<const double> x, std::span<const double> x2) const;
  std::vector<EventId> getEvent(const SignalVector& x, const SignalVector& x2) const;
  /// Concepts containing x.
  std::vector<ConceptId> getConcepts(std::span<const double> x) const;
  std::vector<ConceptId> getConcepts(const SignalVector& x) const;

  /// Causalities starting in s, insertion order. Throws UnknownConcept.
  std::vector<SystemCausality> getSystemCausalities(ConceptId s) const;
  std::vector<SystemCausality> systemCausalities() const;
  /// Causalities consuming p, insertion order. Throws UnknownProduct.
  std::vector<ProductCausality> getProductCausalities(const ProductId& p) const;
  std::vector<ProductCausality> productCausalities() const;

  Event eventById(EventId id) const;
  Concept conceptById(ConceptId id) const;
  std::optional<EventId> findEvent(std::string_view name) const;
  std::optional<ConceptId> findConcept(std::string_view name) const;
  std::vector<Event> events() const;
  std::vector<Concept> concepts() const;
  std::vector<ProductId> products() const;

 private:
  void checkGuard(const std::set<std::string>& ok) const;

  std::size_t dimension_;
  std::set<std::string, std::less<>> components_;
  std::vector<Event> events_;
  std::vector<Concept> concepts_;
  std::vector<ProductId> products_;
  std::vector<SystemCausality> system_;
  std::vector<ProductCausality> product_;
  mutable std::shared_mutex mutex_;
};

/// Definition file, one record per line (`#` comments):
///
///   event <name>: <inequality>
///   concept <name>: <inequality> [& <inequality>]...
///   product <id>[, <id>]...
///   causality <name>: <concept> -> <concept> [on <event>] [| ok: c1, c2] [| key=value]...
///   step <name>: <p>, <p> -> <q>[, <q>] [on <event>] [| ok: c1] [| key=value]...
///
/// Names must be defined before use. Throws ParseError with the line number.
void loadDefinitions(std::istream& in, CausalModel& model, const SignalSchema& schema);
void loadDefinitionsFile(const std::string& path, CausalModel& model, const SignalSchema& schema);
std::string formatDefinitions(const CausalModel& model, const SignalSchema& schema);

struct ConsistencyEntry {
  std::string causality;
  ConceptId from;
  ConceptId expected;
  std::vector<ConceptId> observed;
  bool consistent = true;
};

struct ConsistencyReport {
  Timestamp t = 0.0;
  Timestamp previous = 0.0;
  std::vector<ConsistencyEntry> entries;

  std::size_t mismatches() const;
};

/// Compares the concepts that causalities predict from the state at the
/// previous stored sample with the concepts containing getData(t). Causalities
/// whose OK guard names a component failed in `session` are skipped.
ConsistencyReport checkStateConsistency(const CausalModel& model, const DataStore& data, Timestamp t,
                                        const Session& session);

}  // namespace aitwin
