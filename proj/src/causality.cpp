#include "aitwin/causality.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <mutex>
#include <sstream>

#include "aitwin/error.hpp"
#include "aitwin/prediction.hpp"
#include "text_util.hpp"

namespace aitwin {

// ---------------------------------------------------------------------------
// Inequalities

double LinearInequality::slack(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * x[i];
  return s - c;
}

void LinearInequality::validate(std::size_t dimension) const {
  if (f.size() != dimension)
    throw TwinError(Errc::SchemaMismatch, "inequality has " + std::to_string(f.size()) + " coefficients, expected " +
                                              std::to_string(dimension));
  if (!std::isfinite(c) || std::any_of(f.begin(), f.end(), [](double v) { return !std::isfinite(v); }))
    throw TwinError(Errc::SchemaMismatch, "inequality has non-finite entries");
  if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; }))
    throw TwinError(Errc::ZeroCoefficientVector, "inequality does not involve any signal");
}

namespace {

enum class Tok { Number, Name, Plus, Minus, Star, Less, Greater, Amp, End };

struct Token {
  Tok kind;
  double number = 0.0;
  std::string text;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char ch = s[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      std::string rest(s.substr(i));
      char* end = nullptr;
      const double v = std::strtod(rest.c_str(), &end);
      if (end == rest.c_str()) throw ParseError(0, "bad number near '" + rest + "'");
      out.push_back({Tok::Number, v, rest.substr(0, static_cast<std::size_t>(end - rest.c_str()))});
      i += static_cast<std::size_t>(end - rest.c_str());
    } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Tok::Name, 0.0, std::string(s.substr(i, j - i))});
      i = j;
    } else {
      Tok kind;
      switch (ch) {
        case '+': kind = Tok::Plus; break;
        case '-': kind = Tok::Minus; break;
        case '*': kind = Tok::Star; break;
        case '<': kind = Tok::Less; break;
        case '>': kind = Tok::Greater; break;
        case '&': kind = Tok::Amp; break;
        default: throw ParseError(0, std::string("unexpected character '") + ch + "'");
      }
      out.push_back({kind, 0.0, std::string(1, ch)});
      ++i;
    }
  }
  out.push_back({Tok::End, 0.0, ""});
  return out;
}

// Affine form sum(f_i x_i) + constant.
struct Affine {
  std::vector<double> f;
  double constant = 0.0;
};

class InequalityParser {
 public:
  InequalityParser(std::vector<Token> toks, const SignalSchema& schema) : toks_(std::move(toks)), schema_(schema) {}

  std::vector<LinearInequality> parse() {
    std::vector<LinearInequality> out;
    while (true) {
      auto chain = parseChain();
      out.insert(out.end(), chain.begin(), chain.end());
      if (peek().kind == Tok::Amp) {
        ++pos_;
        continue;
      }
      if (peek().kind != Tok::End) throw ParseError(0, "unexpected '" + peek().text + "'");
      break;
    }
    return out;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }

  std::vector<LinearInequality> parseChain() {
    std::vector<Affine> sides{parseExpr()};
    std::vector<Tok> ops;
    while (peek().kind == Tok::Less || peek().kind == Tok::Greater) {
      ops.push_back(peek().kind);
      ++pos_;
      sides.push_back(parseExpr());
    }
    if (ops.empty()) throw ParseError(0, "expected '<' or '>'");
    if (ops.size() > 2) throw ParseError(0, "at most two comparisons may be chained");
    std::vector<LinearInequality> out;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      // lhs < rhs  <=>  (lhs - rhs).f . x < rhs.constant - lhs.constant
      const Affine& lo = ops[k] == Tok::Less ? sides[k] : sides[k + 1];
      const Affine& hi = ops[k] == Tok::Less ? sides[k + 1] : sides[k];
      LinearInequality ineq;
      ineq.f.resize(schema_.size());
      for (std::size_t i = 0; i < schema_.size(); ++i) ineq.f[i] = lo.f[i] - hi.f[i];
      ineq.c = hi.constant - lo.constant;
      out.push_back(std::move(ineq));
    }
    return out;
  }

  Affine parseExpr() {
    Affine a{std::vector<double>(schema_.size(), 0.0), 0.0};
    double sign = 1.0;
    if (peek().kind == Tok::Minus) {
      sign = -1.0;
      ++pos_;
    } else if (peek().kind == Tok::Plus) {
      ++pos_;
    }
    parseTerm(a, sign);
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      sign = peek().kind == Tok::Plus ? 1.0 : -1.0;
      ++pos_;
      parseTerm(a, sign);
    }
    return a;
  }

  void parseTerm(Affine& a, double sign) {
    double coeff = sign;
    std::optional<std::size_t> signal;
    auto take = [&]() {
      for (; peek().kind == Tok::Minus || peek().kind == Tok::Plus; ++pos_)
        if (peek().kind == Tok::Minus) coeff = -coeff;
      const Token& t = peek();
      if (t.kind == Tok::Number) {
        coeff *= t.number;
      } else if (t.kind == Tok::Name) {
        if (signal) throw ParseError(0, "a term may reference only one signal");
        signal = schema_.indexOf(t.text);
        if (!signal) throw ParseError(0, "unknown signal '" + t.text + "'");
      } else {
        throw ParseError(0, t.kind == Tok::End ? "unexpected end of inequality" : "unexpected '" + t.text + "'");
      }
      ++pos_;
    };
    take();
    if (peek().kind == Tok::Star) {
      ++pos_;
      take();
    }
    if (signal)
      a.f[*signal] += coeff;
    else
      a.constant += coeff;
  }

  std::vector<Token> toks_;
  const SignalSchema& schema_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<LinearInequality> parseInequalities(std::string_view text, const SignalSchema& schema) {
  auto out = InequalityParser(tokenize(text), schema).parse();
  for (const auto& ineq : out) ineq.validate(schema.size());
  return out;
}

std::string formatInequality(const LinearInequality& ineq, const SignalSchema& schema) {
  std::string out;
  for (std::size_t i = 0; i < ineq.f.size(); ++i) {
    if (ineq.f[i] == 0.0) continue;
    if (!out.empty()) out += " + ";
    out += formatReal(ineq.f[i]) + "*" + schema[i].name;
  }
  return out + " < " + formatReal(ineq.c);
}

bool Concept::contains(std::span<const double> x) const {
  return std::all_of(region.begin(), region.end(), [&](const LinearInequality& h) { return h.holds(x); });
}

// ---------------------------------------------------------------------------
// CausalModel

CausalModel::CausalModel(std::size_t dimension, std::vector<std::string> components)
    : dimension_(dimension), components_(components.begin(), components.end()) {}

CausalModel::CausalModel(const CausalModel& other) {
  std::shared_lock lock(other.mutex_);
  dimension_ = other.dimension_;
  components_ = other.components_;
  events_ = other.events_;
  concepts_ = other.concepts_;
  products_ = other.products_;
  system_ = other.system_;
  product_ = other.product_;
}

CausalModel& CausalModel::operator=(const CausalModel& other) {
  if (this == &other) return *this;
  CausalModel copy(other);
  std::unique_lock lock(mutex_);
  dimension_ = copy.dimension_;
  components_ = std::move(copy.components_);
  events_ = std::move(copy.events_);
  concepts_ = std::move(copy.concepts_);
  products_ = std::move(copy.products_);
  system_ = std::move(copy.system_);
  product_ = std::move(copy.product_);
  return *this;
}

void CausalModel::checkGuard(const std::set<std::string>& ok) const {
  if (components_.empty()) return;
  for (const auto& c : ok)
    if (!components_.contains(c)) throw TwinError(Errc::DanglingReference, "unknown component '" + c + "' in OK guard");
}

EventId CausalModel::defineEvent(LinearInequality hs, std::string name) {
  hs.validate(dimension_);
  std::unique_lock lock(mutex_);
  for (const auto& e : events_)
    if (e.name == name) throw TwinError(Errc::DuplicateId, "event '" + name + "' already defined");
  EventId id{events_.size()};
  events_.push_back({id, std::move(name), std::move(hs)});
  return id;
}

ConceptId CausalModel::defineConcept(std::vector<LinearInequality> region, std::string name) {
  if (region.empty()) throw TwinError(Errc::EmptyRegion, "concept '" + name + "' has no inequalities");
  for (const auto& h : region) h.validate(dimension_);
  std::unique_lock lock(mutex_);
  for (const auto& c : concepts_)
    if (c.name == name) throw TwinError(Errc::DuplicateId, "concept '" + name + "' already defined");
  ConceptId id{concepts_.size()};
  concepts_.push_back({id, std::move(name), std::move(region)});
  return id;
}

void CausalModel::defineProduct(ProductId id) {
  if (!detail::isIdentifier(id)) throw TwinError(Errc::ParseError, "invalid product id '" + id + "'");
  std::unique_lock lock(mutex_);
  if (std::find(products_.begin(), products_.end(), id) != products_.end())
    throw TwinError(Errc::DuplicateId, "product '" + id + "' already defined");
  products_.push_back(std::move(id));
}

void CausalModel::addSystemCausality(SystemCausality sc) {
  std::unique_lock lock(mutex_);
  if (sc.s1.value >= concepts_.size() || sc.s2.value >= concepts_.size())
    throw TwinError(Errc::DanglingReference, "causality '" + sc.name + "' references an unknown concept");
  if (sc.e && sc.e->value >= events_.size())
    throw TwinError(Errc::DanglingReference, "causality '" + sc.name + "' references an unknown event");
  checkGuard(sc.ok);
  for (const auto& other : system_)
    if (other.name == sc.name) throw TwinError(Errc::DuplicateId, "causality '" + sc.name + "' already defined");
  system_.push_back(std::move(sc));
}

void CausalModel::addProductCausality(ProductCausality pc) {
  std::unique_lock lock(mutex_);
  if (pc.inputs.empty()) throw TwinError(Errc::EmptyInput, "step '" + pc.name + "' consumes nothing");
  auto known = [&](const ProductId& p) { return std::find(products_.begin(), products_.end(), p) != products_.end(); };
  for (const auto* side : {&pc.inputs, &pc.outputs})
    for (const auto& p : *side)
      if (!known(p)) throw TwinError(Errc::DanglingReference, "step '" + pc.name + "' references unknown product '" + p + "'");
  if (pc.e && pc.e->value >= events_.size())
    throw TwinError(Errc::DanglingReference, "step '" + pc.name + "' references an unknown event");
  checkGuard(pc.ok);
  for (const auto& other : product_)
    if (other.name == pc.name) throw TwinError(Errc::DuplicateId, "step '" + pc.name + "' already defined");
  product_.push_back(std::move(pc));
}

std::vector<EventId> CausalModel::getEvent(std::span<const double> x, std::span<const double> x2) const {
  if (x.size() != dimension_ || x2.size() != dimension_) throw TwinError(Errc::SchemaMismatch, "wrong vector length");
  std::shared_lock lock(mutex_);
  std::vector<EventId> out;
  for (const auto& e : events_)
    if (e.hs.holds(x) != e.hs.holds(x2)) out.push_back(e.id);
  return out;
}

std::vector<EventId> CausalModel::getEvent(const SignalVector& x, const SignalVector& x2) const {
  return getEvent(requireComplete(x), requireComplete(x2));
}

std::vector<ConceptId> CausalModel::getConcepts(std::span<const double> x) const {
  if (x.size() != dimension_) throw TwinError(Errc::SchemaMismatch, "wrong vector length");
  std::shared_lock lock(mutex_);
  std::vector<ConceptId> out;
  for (const auto& c : concepts_)
    if (c.contains(x)) out.push_back(c.id);
  return out;
}

std::vector<ConceptId> CausalModel::getConcepts(const SignalVector& x) const { return getConcepts(requireComplete(x)); }

std::vector<SystemCausality> CausalModel::getSystemCausalities(ConceptId s) const {
  std::shared_lock lock(mutex_);
  if (s.value >= concepts_.size()) throw TwinError(Errc::UnknownConcept, "concept #" + std::to_string(s.value));
  std::vector<SystemCausality> out;
  for (const auto& sc : system_)
    if (sc.s1 == s) out.push_back(sc);
  return out;
}

std::vector<SystemCausality> CausalModel::systemCausalities() const {
  std::shared_lock lock(mutex_);
  return system_;
}

std::vector<ProductCausality> CausalModel::getProductCausalities(const ProductId& p) const {
  std::shared_lock lock(mutex_);
  if (std::find(products_.begin(), products_.end(), p) == products_.end())
    throw TwinError(Errc::UnknownProduct, "'" + p + "'");
  std::vector<ProductCausality> out;
  for (const auto& pc : product_)
    if (std::find(pc.inputs.begin(), pc.inputs.end(), p) != pc.inputs.end()) out.push_back(pc);
  return out;
}

std::vector<ProductCausality> CausalModel::productCausalities() const {
  std::shared_lock lock(mutex_);
  return product_;
}

Event CausalModel::eventById(EventId id) const {
  std::shared_lock lock(mutex_);
  if (id.value >= events_.size()) throw TwinError(Errc::DanglingReference, "event #" + std::to_string(id.value));
  return events_[id.value];
}

Concept CausalModel::conceptById(ConceptId id) const {
  std::shared_lock lock(mutex_);
  if (id.value >= concepts_.size()) throw TwinError(Errc::UnknownConcept, "concept #" + std::to_string(id.value));
  return concepts_[id.value];
}

std::optional<EventId> CausalModel::findEvent(std::string_view name) const {
  std::shared_lock lock(mutex_);
  for (const auto& e : events_)
    if (e.name == name) return e.id;
  return std::nullopt;
}

std::optional<ConceptId> CausalModel::findConcept(std::string_view name) const {
  std::shared_lock lock(mutex_);
  for (const auto& c : concepts_)
    if (c.name == name) return c.id;
  return std::nullopt;
}

std::vector<Event> CausalModel::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

std::vector<Concept> CausalModel::concepts() const {
  std::shared_lock lock(mutex_);
  return concepts_;
}

std::vector<ProductId> CausalModel::products() const {
  std::shared_lock lock(mutex_);
  return products_;
}

// ---------------------------------------------------------------------------
// Definition files

namespace {

std::vector<LinearInequality> parseAt(std::string_view text, const SignalSchema& schema, std::size_t line) {
  try {
    return parseInequalities(text, schema);
  } catch (const ParseError& e) {
    // Re-anchor tokenizer errors to the file line.
    std::string what = e.what();
    auto pos = what.find(": ", what.find("line"));
    throw ParseError(line, pos == std::string::npos ? what : what.substr(pos + 2));
  } catch (const TwinError& e) {
    throw ParseError(line, e.what());
  }
}

struct Trailer {
  std::set<std::string> ok;
  Metadata info;
};

Trailer parseTrailer(const std::vector<std::string>& fields, std::size_t line) {
  Trailer t;
  for (std::size_t k = 1; k < fields.size(); ++k) {
    auto f = detail::trim(fields[k]);
    if (f.rfind("ok:", 0) == 0) {
      for (auto& c : detail::splitTrimmed(f.substr(3), ',')) t.ok.insert(c);
      continue;
    }
    auto eq = f.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, "expected 'ok: ...' or 'key=value', got '" + std::string(f) + "'");
    t.info[std::string(detail::trim(f.substr(0, eq)))] = std::string(detail::trim(f.substr(eq + 1)));
  }
  return t;
}

// "<lhs> -> <rhs> [on <event>]"
struct Arrow {
  std::string lhs, rhs;
  std::optional<std::string> event;
};

Arrow parseArrow(std::string_view text, std::size_t line) {
  auto arrow = text.find("->");
  if (arrow == std::string_view::npos) throw ParseError(line, "expected '->'");
  Arrow a;
  a.lhs = std::string(detail::trim(text.substr(0, arrow)));
  std::string_view rest = detail::trim(text.substr(arrow + 2));
  auto on = rest.find(" on ");
  if (on != std::string_view::npos) {
    a.event = std::string(detail::trim(rest.substr(on + 4)));
    rest = detail::trim(rest.substr(0, on));
  }
  a.rhs = std::string(rest);
  return a;
}

}  // namespace

void loadDefinitions(std::istream& in, CausalModel& model, const SignalSchema& schema) {
  std::string raw;
  std::size_t lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    auto line = detail::trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto space = line.find_first_of(" \t");
    if (space == std::string_view::npos) throw ParseError(lineNo, "expected '<kind> <name>: ...'");
    const std::string kind(line.substr(0, space));
    auto rest = detail::trim(line.substr(space));

    try {
      if (kind == "product") {
        for (auto& p : detail::splitTrimmed(rest, ',')) model.defineProduct(p);
        continue;
      }
      auto colon = rest.find(':');
      if (colon == std::string_view::npos) throw ParseError(lineNo, "expected ':' after the name");
      const std::string name(detail::trim(rest.substr(0, colon)));
      if (!detail::isIdentifier(name)) throw ParseError(lineNo, "invalid name '" + name + "'");
      auto body = detail::trim(rest.substr(colon + 1));

      if (kind == "event") {
        auto ineqs = parseAt(body, schema, lineNo);
        if (ineqs.size() != 1) throw ParseError(lineNo, "an event is exactly one inequality");
        model.defineEvent(std::move(ineqs.front()), name);
      } else if (kind == "concept") {
        model.defineConcept(parseAt(body, schema, lineNo), name);
      } else if (kind == "causality" || kind == "step") {
        auto fields = detail::split(body, '|');
        auto arrow = parseArrow(fields.front(), lineNo);
        auto trailer = parseTrailer(fields, lineNo);
        std::optional<EventId> event;
        if (arrow.event) {
          event = model.findEvent(*arrow.event);
          if (!event) throw TwinError(Errc::DanglingReference, "unknown event '" + *arrow.event + "'");
        }
        if (kind == "causality") {
          auto s1 = model.findConcept(arrow.lhs);
          auto s2 = model.findConcept(arrow.rhs);
          if (!s1 || !s2) throw TwinError(Errc::DanglingReference, "unknown concept in '" + name + "'");
          model.addSystemCausality({*s1, event, *s2, std::move(trailer.info), name, std::move(trailer.ok)});
        } else {
          model.addProductCausality({detail::splitTrimmed(arrow.lhs, ','), event, detail::splitTrimmed(arrow.rhs, ','),
                                     std::move(trailer.info), name, std::move(trailer.ok)});
        }
      } else {
        throw ParseError(lineNo, "unknown record kind '" + kind + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const TwinError& e) {
      // Drop the "<Code>: " prefix that what() already carries.
      const std::string detail = std::string(e.what()).substr(errcName(e.code()).size() + 2);
      if (e.code() == Errc::DanglingReference)
        throw TwinError(Errc::DanglingReference, "line " + std::to_string(lineNo) + ": " + detail);
      throw ParseError(lineNo, std::string(errcName(e.code())) + ": " + detail);
    }
  }
}

void loadDefinitionsFile(const std::string& path, CausalModel& model, const SignalSchema& schema) {
  std::ifstream in(path);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path);
  loadDefinitions(in, model, schema);
}

std::string formatDefinitions(const CausalModel& model, const SignalSchema& schema) {
  std::ostringstream out;
  const auto events = model.events();
  const auto concepts = model.concepts();
  for (const auto& e : events) out << "event " << e.name << ": " << formatInequality(e.hs, schema) << '\n';
  for (const auto& c : concepts) {
    out << "concept " << c.name << ": ";
    for (std::size_t k = 0; k < c.region.size(); ++k)
      out << (k ? " & " : "") << formatInequality(c.region[k], schema);
    out << '\n';
  }
  const auto products = model.products();
  if (!products.empty()) {
    out << "product ";
    for (std::size_t k = 0; k < products.size(); ++k) out << (k ? ", " : "") << products[k];
    out << '\n';
  }
  auto trailer = [&](const std::set<std::string>& ok, const Metadata& info) {
    if (!ok.empty()) {
      out << " | ok: ";
      bool first = true;
      for (const auto& c : ok) {
        out << (first ? "" : ", ") << c;
        first = false;
      }
    }
    for (const auto& [k, v] : info) out << " | " << k << '=' << v;
  };
  for (const auto& sc : model.systemCausalities()) {
    out << "causality " << sc.name << ": " << concepts[sc.s1.value].name << " -> " << concepts[sc.s2.value].name;
    if (sc.e) out << " on " << events[sc.e->value].name;
    trailer(sc.ok, sc.info);
    out << '\n';
  }
  for (const auto& pc : model.productCausalities()) {
    out << "step " << pc.name << ": ";
    for (std::size_t k = 0; k < pc.inputs.size(); ++k) out << (k ? ", " : "") << pc.inputs[k];
    out << " -> ";
    for (std::size_t k = 0; k < pc.outputs.size(); ++k) out << (k ? ", " : "") << pc.outputs[k];
    if (pc.e) out << " on " << events[pc.e->value].name;
    trailer(pc.ok, pc.info);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// State consistency

std::size_t ConsistencyReport::mismatches() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const ConsistencyEntry& e) { return !e.consistent; }));
}

ConsistencyReport checkStateConsistency(const CausalModel& model, const DataStore& data, Timestamp t,
                                        const Session& session) {
  ConsistencyReport report;
  report.t = t;
  const auto current = data.getData(t);
  const auto [first, last] = data.timeRange();
  (void)last;
  auto earlier = data.samplesBetween(first, t - 2 * kTimeEpsilon);
  if (earlier.empty()) return report;
  const Sample& prev = earlier.back();
  report.previous = prev.at;

  const auto before = model.getConcepts(std::span<const double>(prev.x));
  const auto after = model.getConcepts(std::span<const double>(current));
  const auto fired = model.getEvent(std::span<const double>(prev.x), std::span<const double>(current));
  const auto& failed = session.failedComps();

  for (const auto& sc : model.systemCausalities()) {
    if (std::find(before.begin(), before.end(), sc.s1) == before.end()) continue;
    if (sc.e && std::find(fired.begin(), fired.end(), *sc.e) == fired.end()) continue;
    if (std::any_of(sc.ok.begin(), sc.ok.end(), [&](const std::string& c) { return failed.contains(c); })) continue;
    const bool ok = std::find(after.begin(), after.end(), sc.s2) != after.end();
    report.entries.push_back({sc.name, sc.s1, sc.s2, after, ok});
  }
  return report;
}

}  // namespace aitwin
