#include "aitwin/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "aitwin/error.hpp"
#include "text_util.hpp"

namespace aitwin {

SignalSchema::SignalSchema(std::vector<SignalInfo> signals) : signals_(std::move(signals)) {
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < signals_.size(); ++i) {
    auto& s = signals_[i];
    s.index = i;
    if (s.name.empty()) throw TwinError(Errc::SchemaMismatch, "empty signal name at index " + std::to_string(i));
    if (!seen.insert(s.name).second) throw TwinError(Errc::SchemaMismatch, "duplicate signal name '" + s.name + "'");
  }
}

SignalSchema SignalSchema::fromNames(const std::vector<std::string>& names) {
  std::vector<SignalInfo> infos;
  infos.reserve(names.size());
  for (const auto& n : names) infos.push_back({0, n, ""});
  return SignalSchema(std::move(infos));
}

std::optional<std::size_t> SignalSchema::indexOf(std::string_view name) const {
  for (const auto& s : signals_)
    if (s.name == name) return s.index;
  return std::nullopt;
}

std::vector<std::string> SignalSchema::names() const {
  std::vector<std::string> out;
  out.reserve(signals_.size());
  for (const auto& s : signals_) out.push_back(s.name);
  return out;
}

bool operator==(const SignalSchema& a, const SignalSchema& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.signals_[i].name != b.signals_[i].name) return false;
  return true;
}

SignalVector toSignalVector(std::span<const double> x) {
  return SignalVector(x.begin(), x.end());
}

bool isComplete(const SignalVector& x) noexcept {
  return std::all_of(x.begin(), x.end(), [](const auto& v) { return v.has_value(); });
}

std::vector<double> requireComplete(const SignalVector& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i]) throw TwinError(Errc::IncompleteVector, "entry " + std::to_string(i) + " is missing");
    out.push_back(*x[i]);
  }
  return out;
}

DataStore::DataStore(SignalSchema schema) : schema_(std::move(schema)) {}

DataStore::DataStore(const DataStore& other) {
  std::shared_lock lock(other.mutex_);
  schema_ = other.schema_;
  samples_ = other.samples_;
}

DataStore& DataStore::operator=(const DataStore& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_);
  std::shared_lock other_lock(other.mutex_);
  schema_ = other.schema_;
  samples_ = other.samples_;
  return *this;
}

DataStore::DataStore(DataStore&& other) noexcept
    : schema_(std::move(other.schema_)), samples_(std::move(other.samples_)) {}

DataStore& DataStore::operator=(DataStore&& other) noexcept {
  schema_ = std::move(other.schema_);
  samples_ = std::move(other.samples_);
  return *this;
}

void DataStore::ingest(Sample s) {
  if (s.x.size() != schema_.size())
    throw TwinError(Errc::SchemaMismatch, "sample has " + std::to_string(s.x.size()) + " entries, schema has " +
                                              std::to_string(schema_.size()));
  if (!std::isfinite(s.at) || s.at < 0.0) throw TwinError(Errc::NonMonotonicTime, "timestamp must be finite and >= 0");
  for (double v : s.x)
    if (!std::isfinite(v)) throw TwinError(Errc::SchemaMismatch, "non-finite sample entry");

  std::unique_lock lock(mutex_);
  if (!samples_.empty() && s.at <= samples_.back().at)
    throw TwinError(Errc::NonMonotonicTime, "t=" + formatReal(s.at) + " is not after t=" + formatReal(samples_.back().at));
  samples_.push_back(std::move(s));
}

std::vector<double> DataStore::interpolateLocked(Timestamp t) const {
  if (samples_.empty()) throw TwinError(Errc::EmptyStore, "no samples recorded");
  const double first = samples_.front().at;
  const double last = samples_.back().at;
  if (!(t >= first - kTimeEpsilon && t <= last + kTimeEpsilon))
    throw TwinError(Errc::TimeOutOfRange,
                    "t=" + formatReal(t) + " outside [" + formatReal(first) + ", " + formatReal(last) + "]");

  auto upper = std::lower_bound(samples_.begin(), samples_.end(), t,
                                [](const Sample& s, double v) { return s.at < v; });
  if (upper != samples_.end() && std::abs(upper->at - t) <= kTimeEpsilon) return upper->x;
  if (upper != samples_.begin() && std::abs(std::prev(upper)->at - t) <= kTimeEpsilon) return std::prev(upper)->x;

  const Sample& hi = *upper;
  const Sample& lo = *std::prev(upper);
  const double w = (t - lo.at) / (hi.at - lo.at);
  std::vector<double> out(lo.x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo.x[i] + (hi.x[i] - lo.x[i]) * w;
  return out;
}

double DataStore::getData(std::size_t i, Timestamp t) const {
  if (i >= schema_.size())
    throw TwinError(Errc::IndexOutOfRange, "signal " + std::to_string(i) + " of " + std::to_string(schema_.size()));
  std::shared_lock lock(mutex_);
  return interpolateLocked(t)[i];
}

std::vector<double> DataStore::getData(Timestamp t) const {
  std::shared_lock lock(mutex_);
  return interpolateLocked(t);
}

std::pair<Timestamp, Timestamp> DataStore::timeRange() const {
  std::shared_lock lock(mutex_);
  if (samples_.empty()) throw TwinError(Errc::EmptyStore, "no samples recorded");
  return {samples_.front().at, samples_.back().at};
}

std::size_t DataStore::size() const {
  std::shared_lock lock(mutex_);
  return samples_.size();
}

std::vector<Sample> DataStore::samples() const {
  std::shared_lock lock(mutex_);
  return samples_;
}

std::vector<Sample> DataStore::samplesBetween(Timestamp first, Timestamp last) const {
  std::shared_lock lock(mutex_);
  std::vector<Sample> out;
  for (const auto& s : samples_)
    if (s.at >= first - kTimeEpsilon && s.at <= last + kTimeEpsilon) out.push_back(s);
  return out;
}

std::string formatReal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void saveCsv(const DataStore& store, std::ostream& out) {
  out << 't';
  for (const auto& s : store.schema().signals()) out << ',' << s.name;
  out << '\n';
  for (const auto& sample : store.samples()) {
    out << formatReal(sample.at);
    for (double v : sample.x) out << ',' << formatReal(v);
    out << '\n';
  }
}

DataStore loadCsv(std::istream& in) {
  std::string line;
  std::size_t lineNo = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing CSV header");
  ++lineNo;
  auto header = detail::split(detail::trim(line), ',');
  if (header.empty() || detail::trim(header[0]) != "t") throw ParseError(1, "first CSV column must be 't'");
  std::vector<std::string> names;
  for (std::size_t i = 1; i < header.size(); ++i) names.emplace_back(detail::trim(header[i]));
  DataStore store(SignalSchema::fromNames(names));

  while (std::getline(in, line)) {
    ++lineNo;
    auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    auto cells = detail::split(trimmed, ',');
    if (cells.size() != names.size() + 1)
      throw ParseError(lineNo, "expected " + std::to_string(names.size() + 1) + " columns, got " +
                                   std::to_string(cells.size()));
    Sample s;
    s.at = detail::parseReal(cells[0], lineNo);
    s.x.reserve(names.size());
    for (std::size_t i = 1; i < cells.size(); ++i) s.x.push_back(detail::parseReal(cells[i], lineNo));
    try {
      store.ingest(std::move(s));
    } catch (const TwinError& e) {
      throw ParseError(lineNo, e.what());
    }
  }
  return store;
}

void saveCsvFile(const DataStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TwinError(Errc::IoError, "cannot write " + path);
  saveCsv(store, out);
  if (!out) throw TwinError(Errc::IoError, "write failed for " + path);
}

DataStore loadCsvFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TwinError(Errc::IoError, "cannot read " + path);
  return loadCsv(in);
}

}  // namespace aitwin
