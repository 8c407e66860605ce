#pragma once

// Prediction-enabled layer of the twin: static / dynamic extrapolation with
// per-entry probabilities, anomaly scores, and failure-mode activation over
// pluggable predictor backends.
//
// Lifecycle: a BackendFactory turns training history into an immutable
// Predictor; FittedModel bundles it with normalization statistics, a kernel
// density estimate, and residual spreads. Sessions are cheap single-owner
// handles over a shared FittedModel that carry the active failure assignment.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "aitwin/component.hpp"
#include "aitwin/data_model.hpp"

namespace aitwin {

namespace sim {
struct Topology;
struct OpeningCommand;
}  // namespace sim

/// Floor for standard deviations, in z-units for residuals and in signal
/// units for the raw per-signal spread.
inline constexpr double kSigmaMin = 1e-6;

struct PredictionResult {
  SignalVector x;
  /// Confidence in [0, 1] per entry; null exactly where x is null.
  std::vector<std::optional<double>> p;

  static PredictionResult allNull(std::size_t n);
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> sd;  // population sd floored at kSigmaMin

  static NormStats fit(std::span<const Sample> history);
  std::vector<double> z(std::span<const double> x) const;
};

/// Product-Gaussian KDE in z-space with Silverman's bandwidth (unit spread per
/// dimension). Works in log space so far-away queries never underflow.
class KernelDensity {
 public:
  explicit KernelDensity(std::vector<std::vector<double>> points);

  double bandwidth() const noexcept { return bandwidth_; }
  std::size_t size() const noexcept { return points_.size(); }
  double logDensity(std::span<const double> z) const;
  /// Density at point i from all other points; -inf for a single point.
  double leaveOneOutLogDensity(std::size_t i) const;

 private:
  double logDensityExcluding(std::span<const double> z, std::optional<std::size_t> skip) const;

  std::vector<std::vector<double>> points_;
  double bandwidth_ = 1.0;
  double logNorm_ = 0.0;
};

/// A fitted, immutable backend. Safe to share across threads.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string_view name() const = 0;
  /// False when the backend cannot condition on failure modes; such backends
  /// return null predictions whenever a failure assignment is active.
  virtual bool honorsFailures() const = 0;

  virtual PredictionResult predictStatic(const SignalVector& partial, const FailureAssignment& fa) const = 0;
  virtual PredictionResult predictDynamic(std::span<const Sample> window, double dt,
                                          const FailureAssignment& fa) const = 0;

  /// Prediction of history[j + 1] from history[0..j] as used for residual
  /// statistics. Data-driven backends leave sample j out of their neighbour
  /// set so the target never leaks into its own prediction.
  virtual PredictionResult crossValidatedStep(std::span<const Sample> history, std::size_t j) const;
};

using BackendFactory =
    std::function<std::shared_ptr<const Predictor>(std::span<const Sample> history, const NormStats& stats)>;

/// k-nearest-neighbour completion (k = 5, inverse-distance weights in z-space).
BackendFactory knnKdeBackend();
/// The simulator's own discrete dynamics; failure-aware.
BackendFactory physicsBackend(const sim::Topology& topology, std::vector<sim::OpeningCommand> commands = {});

class FittedModel {
 public:
  /// Throws EmptyHistory / NonMonotonicTime.
  static std::shared_ptr<const FittedModel> fit(const BackendFactory& factory, std::span<const Sample> history);

  const NormStats& stats() const noexcept { return stats_; }
  const Predictor& predictor() const noexcept { return *predictor_; }
  const KernelDensity& density() const noexcept { return kde_; }
  std::size_t dimension() const noexcept { return stats_.mean.size(); }
  /// One-step residual spread per signal, signal units.
  const std::vector<double>& residualSigma() const noexcept { return residualSigma_; }

  /// Rank-calibrated normality of a complete vector.
  double staticScore(std::span<const double> x) const;
  /// exp(-1/2 * mean r^2) over the predicted entries; NotComputable when none.
  double dynamicScore(const PredictionResult& predicted, std::span<const double> actual) const;

  /// Leave-one-out scores of the training points (threshold calibration).
  const std::vector<double>& trainingStaticScores() const noexcept { return trainingStatic_; }
  const std::vector<double>& trainingDynamicScores() const noexcept { return trainingDynamic_; }

 private:
  FittedModel(NormStats stats, KernelDensity kde, std::shared_ptr<const Predictor> predictor)
      : stats_(std::move(stats)), kde_(std::move(kde)), predictor_(std::move(predictor)) {}

  NormStats stats_;
  KernelDensity kde_;
  std::shared_ptr<const Predictor> predictor_;
  std::vector<double> looSorted_;
  std::vector<double> residualSigma_;
  std::vector<double> trainingStatic_;
  std::vector<double> trainingDynamic_;
};

/// Per-caller handle; failure modes set here never leak into other sessions.
class Session {
 public:
  Session(std::shared_ptr<const FittedModel> model, std::shared_ptr<const std::vector<Component>> comps,
          std::size_t dimension);

  void setFailedComps(FailureAssignment fa);
  const FailureAssignment& failedComps() const noexcept { return failed_; }
  bool fitted() const noexcept { return model_ != nullptr; }

  PredictionResult extrapolateStatic(const SignalVector& partial) const;
  PredictionResult extrapolateDynamic(std::span<const Sample> window, double dt) const;
  double anomalyScoreStatic(const SignalVector& x) const;
  double anomalyScoreDynamic(std::span<const Sample> window) const;

 private:
  const FittedModel& model() const;
  void checkWindow(std::span<const Sample> window) const;

  std::shared_ptr<const FittedModel> model_;
  std::shared_ptr<const std::vector<Component>> comps_;
  std::size_t dimension_;
  FailureAssignment failed_;
};

}  // namespace aitwin
