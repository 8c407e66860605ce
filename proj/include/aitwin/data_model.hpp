#pragma once

// Synchronized data layer: the signal space, complete time-stamped samples,
// and point queries getData(i, t) / getData(t) over a recorded run.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aitwin {

/// Seconds since scenario epoch.
using Timestamp = double;

/// Exact-hit tolerance for time queries.
inline constexpr double kTimeEpsilon = 1e-9;

/// Partially observed signal vector; nullopt marks a missing entry.
using SignalVector = std::vector<std::optional<double>>;

struct SignalInfo {
  std::size_t index = 0;
  std::string name;
  std::string unit;
};

class SignalSchema {
 public:
  SignalSchema() = default;
  /// Throws SchemaMismatch on duplicate or empty names.
  explicit SignalSchema(std::vector<SignalInfo> signals);
  static SignalSchema fromNames(const std::vector<std::string>& names);

  std::size_t size() const noexcept { return signals_.size(); }
  const std::vector<SignalInfo>& signals() const noexcept { return signals_; }
  const SignalInfo& operator[](std::size_t i) const { return signals_.at(i); }
  std::optional<std::size_t> indexOf(std::string_view name) const;
  std::vector<std::string> names() const;

  friend bool operator==(const SignalSchema& a, const SignalSchema& b);

 private:
  std::vector<SignalInfo> signals_;
};

/// A complete observation; the store never holds partial vectors.
struct Sample {
  Timestamp at = 0.0;
  std::vector<double> x;
};

SignalVector toSignalVector(std::span<const double> x);
bool isComplete(const SignalVector& x) noexcept;
/// Throws IncompleteVector when any entry is missing.
std::vector<double> requireComplete(const SignalVector& x);

/// Time-ordered sample store. Many concurrent readers, one writer.
class DataStore {
 public:
  explicit DataStore(SignalSchema schema);
  DataStore(const DataStore& other);
  DataStore& operator=(const DataStore& other);
  DataStore(DataStore&& other) noexcept;
  DataStore& operator=(DataStore&& other) noexcept;

  const SignalSchema& schema() const noexcept { return schema_; }

  /// Appends s. Throws NonMonotonicTime / SchemaMismatch and leaves the store unchanged.
  void ingest(Sample s);

  /// Entry i at time t, interpolated between neighbouring samples.
  double getData(std::size_t i, Timestamp t) const;
  /// All signals at time t: the stored vector on an exact hit (|dt| <= kTimeEpsilon),
  /// otherwise entrywise linear interpolation.
  std::vector<double> getData(Timestamp t) const;

  std::pair<Timestamp, Timestamp> timeRange() const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  /// Consistent snapshot of all samples.
  std::vector<Sample> samples() const;
  /// Samples with first <= at <= last.
  std::vector<Sample> samplesBetween(Timestamp first, Timestamp last) const;

 private:
  std::vector<double> interpolateLocked(Timestamp t) const;

  SignalSchema schema_;
  std::vector<Sample> samples_;
  mutable std::shared_mutex mutex_;
};

/// CSV: header `t,<name0>,<name1>,...`, one row per sample, values with 17
/// significant digits so load(save(s)) reproduces every double bitwise.
void saveCsv(const DataStore& store, std::ostream& out);
DataStore loadCsv(std::istream& in);
void saveCsvFile(const DataStore& store, const std::string& path);
DataStore loadCsvFile(const std::string& path);

/// Shortest-exact decimal form used by every text writer in the project.
std::string formatReal(double v);

}  // namespace aitwin
