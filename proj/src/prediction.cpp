#include "aitwin/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "aitwin/error.hpp"

namespace aitwin {

PredictionResult PredictionResult::allNull(std::size_t n) {
  return {SignalVector(n), std::vector<std::optional<double>>(n)};
}

NormStats NormStats::fit(std::span<const Sample> history) {
  if (history.empty()) throw TwinError(Errc::EmptyHistory, "cannot fit on an empty history");
  const std::size_t n = history.front().x.size();
  NormStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (const auto& sample : history)
    for (std::size_t i = 0; i < n; ++i) s.mean[i] += sample.x[i];
  for (auto& m : s.mean) m /= static_cast<double>(history.size());
  for (const auto& sample : history)
    for (std::size_t i = 0; i < n; ++i) s.sd[i] += (sample.x[i] - s.mean[i]) * (sample.x[i] - s.mean[i]);
  for (auto& v : s.sd) v = std::max(std::sqrt(v / static_cast<double>(history.size())), kSigmaMin);
  return s;
}

std::vector<double> NormStats::z(std::span<const double> x) const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / sd[i];
  return out;
}

// ---------------------------------------------------------------------------
// KernelDensity

KernelDensity::KernelDensity(std::vector<std::vector<double>> points) : points_(std::move(points)) {
  if (points_.empty()) throw TwinError(Errc::EmptyHistory, "density needs at least one point");
  const double d = static_cast<double>(points_.front().size());
  const double n = static_cast<double>(points_.size());
  bandwidth_ = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  logNorm_ = d * std::log(bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
}

double KernelDensity::logDensityExcluding(std::span<const double> z, std::optional<std::size_t> skip) const {
  const double inv = 1.0 / bandwidth_;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> exps;
  exps.reserve(points_.size());
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (skip && *skip == k) continue;
    double q = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double u = (z[j] - points_[k][j]) * inv;
      q += u * u;
    }
    exps.push_back(-0.5 * q);
    best = std::max(best, exps.back());
  }
  const double count = static_cast<double>(points_.size() - (skip ? 1 : 0));
  if (exps.empty() || !std::isfinite(best)) return -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double e : exps) sum += std::exp(e - best);
  return best + std::log(sum) - std::log(count) - logNorm_;
}

double KernelDensity::logDensity(std::span<const double> z) const { return logDensityExcluding(z, std::nullopt); }

double KernelDensity::leaveOneOutLogDensity(std::size_t i) const { return logDensityExcluding(points_.at(i), i); }

// ---------------------------------------------------------------------------
// Predictor

PredictionResult Predictor::crossValidatedStep(std::span<const Sample> history, std::size_t j) const {
  const double dt = history[j + 1].at - history[j].at;
  return predictDynamic(history.subspan(0, j + 1), dt, {});
}

// ---------------------------------------------------------------------------
// FittedModel

namespace {

std::vector<std::vector<double>> zPoints(const NormStats& stats, std::span<const Sample> history) {
  std::vector<std::vector<double>> out;
  out.reserve(history.size());
  for (const auto& s : history) out.push_back(stats.z(s.x));
  return out;
}

}  // namespace

std::shared_ptr<const FittedModel> FittedModel::fit(const BackendFactory& factory, std::span<const Sample> history) {
  if (history.empty()) throw TwinError(Errc::EmptyHistory, "cannot fit on an empty history");
  const std::size_t n = history.front().x.size();
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (history[k].x.size() != n) throw TwinError(Errc::SchemaMismatch, "ragged training history");
    if (k > 0 && !(history[k].at > history[k - 1].at))
      throw TwinError(Errc::NonMonotonicTime, "training history must be strictly time-ordered");
  }

  auto stats = NormStats::fit(history);
  KernelDensity kde(zPoints(stats, history));
  auto predictor = factory(history, stats);
  std::shared_ptr<FittedModel> model(new FittedModel(std::move(stats), std::move(kde), std::move(predictor)));

  const std::size_t count = history.size();
  model->looSorted_.resize(count);
  for (std::size_t k = 0; k < count; ++k) model->looSorted_[k] = model->kde_.leaveOneOutLogDensity(k);
  std::vector<double> loo = model->looSorted_;
  std::sort(model->looSorted_.begin(), model->looSorted_.end());
  model->trainingStatic_.reserve(count);
  for (double v : loo) {
    auto rank = std::upper_bound(model->looSorted_.begin(), model->looSorted_.end(), v) - model->looSorted_.begin();
    model->trainingStatic_.push_back(static_cast<double>(rank) / static_cast<double>(count));
  }

  // One-step residuals, cross-validated.
  std::vector<std::vector<double>> residuals;
  std::vector<double> sumSq(n, 0.0);
  std::vector<std::size_t> hits(n, 0);
  for (std::size_t j = 0; j + 1 < count; ++j) {
    auto pred = model->predictor_->crossValidatedStep(history, j);
    std::vector<double> r(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
      if (!pred.x[i]) continue;
      r[i] = history[j + 1].x[i] - *pred.x[i];
      sumSq[i] += r[i] * r[i];
      ++hits[i];
    }
    residuals.push_back(std::move(r));
  }
  model->residualSigma_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rms = hits[i] > 0 ? std::sqrt(sumSq[i] / static_cast<double>(hits[i])) : 0.0;
    model->residualSigma_[i] = std::max(rms, kSigmaMin * model->stats_.sd[i]);
  }
  for (const auto& r : residuals) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(r[i])) continue;
      const double u = r[i] / model->residualSigma_[i];
      acc += u * u;
      ++used;
    }
    if (used > 0) model->trainingDynamic_.push_back(std::exp(-0.5 * acc / static_cast<double>(used)));
  }
  return model;
}

double FittedModel::staticScore(std::span<const double> x) const {
  const double logd = kde_.logDensity(stats_.z(x));
  auto rank = std::upper_bound(looSorted_.begin(), looSorted_.end(), logd) - looSorted_.begin();
  return static_cast<double>(rank) / static_cast<double>(looSorted_.size());
}

double FittedModel::dynamicScore(const PredictionResult& predicted, std::span<const double> actual) const {
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!predicted.x[i]) continue;
    const double u = (actual[i] - *predicted.x[i]) / residualSigma_[i];
    acc += u * u;
    ++used;
  }
  if (used == 0) throw TwinError(Errc::NotComputable, "backend predicted no entries for this window");
  return std::exp(-0.5 * acc / static_cast<double>(used));
}

// ---------------------------------------------------------------------------
// Session

Session::Session(std::shared_ptr<const FittedModel> model, std::shared_ptr<const std::vector<Component>> comps,
                 std::size_t dimension)
    : model_(std::move(model)), comps_(std::move(comps)), dimension_(dimension) {}

void Session::setFailedComps(FailureAssignment fa) {
  validateAssignment(fa, comps_ ? std::span<const Component>(*comps_) : std::span<const Component>());
  failed_ = std::move(fa);
}

const FittedModel& Session::model() const {
  if (!model_) throw TwinError(Errc::NotFitted, "fit a backend before predicting");
  return *model_;
}

void Session::checkWindow(std::span<const Sample> window) const {
  if (window.empty()) throw TwinError(Errc::EmptyWindow, "window has no samples");
  for (std::size_t k = 0; k < window.size(); ++k) {
    if (window[k].x.size() != dimension_) throw TwinError(Errc::SchemaMismatch, "window sample has wrong length");
    if (k > 0 && !(window[k].at > window[k - 1].at))
      throw TwinError(Errc::NonMonotonicWindow, "window must be strictly time-ordered");
  }
}

namespace {

// Given entries are echoed with p = 1; nullity is paired and p clamped.
PredictionResult finalize(PredictionResult r, const SignalVector& given) {
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    if (i < given.size() && given[i]) {
      r.x[i] = given[i];
      r.p[i] = 1.0;
      continue;
    }
    if (!r.x[i] || !std::isfinite(*r.x[i]) || !r.p[i] || !std::isfinite(*r.p[i])) {
      r.x[i].reset();
      r.p[i].reset();
      continue;
    }
    r.p[i] = std::clamp(*r.p[i], 0.0, 1.0);
  }
  return r;
}

}  // namespace

PredictionResult Session::extrapolateStatic(const SignalVector& partial) const {
  const auto& m = model();
  if (partial.size() != dimension_)
    throw TwinError(Errc::SchemaMismatch, "expected " + std::to_string(dimension_) + " entries");
  for (const auto& v : partial)
    if (v && !std::isfinite(*v)) throw TwinError(Errc::SchemaMismatch, "non-finite given entry");
  if (!failed_.empty() && !m.predictor().honorsFailures()) return finalize(PredictionResult::allNull(dimension_), partial);
  auto r = m.predictor().predictStatic(partial, failed_);
  r.x.resize(dimension_);
  r.p.resize(dimension_);
  return finalize(std::move(r), partial);
}

PredictionResult Session::extrapolateDynamic(std::span<const Sample> window, double dt) const {
  const auto& m = model();
  checkWindow(window);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw TwinError(Errc::InvalidHorizon, "horizon must be > 0");
  if (!failed_.empty() && !m.predictor().honorsFailures()) return PredictionResult::allNull(dimension_);
  auto r = m.predictor().predictDynamic(window, dt, failed_);
  r.x.resize(dimension_);
  r.p.resize(dimension_);
  return finalize(std::move(r), {});
}

double Session::anomalyScoreStatic(const SignalVector& x) const {
  const auto& m = model();
  if (x.size() != dimension_) throw TwinError(Errc::SchemaMismatch, "expected " + std::to_string(dimension_) + " entries");
  return m.staticScore(requireComplete(x));
}

double Session::anomalyScoreDynamic(std::span<const Sample> window) const {
  const auto& m = model();
  if (window.size() < 2) throw TwinError(Errc::WindowTooShort, "need at least two samples");
  checkWindow(window);
  const auto& last = window.back();
  const auto pred = extrapolateDynamic(window.first(window.size() - 1), last.at - window[window.size() - 2].at);
  return m.dynamicScore(pred, last.x);
}

}  // namespace aitwin
