#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "geoworld/collect.hpp"
#include "geoworld/stats.hpp"

namespace geoworld::probe {

using collect::LabeledLatent;
using LabeledLatents = std::span<const LabeledLatent>;

inline constexpr std::size_t kFeatures = wm::kLatentDim;
inline constexpr std::size_t kDirections = 4;

/// Per-feature standardisation fitted on a training set.
struct Standardizer {
  std::array<double, kFeatures> mean{};
  std::array<double, kFeatures> scale{};  ///< std with a 1e-8 floor

  static Standardizer fit(LabeledLatents rows);
  std::array<double, kFeatures> apply(const std::array<double, kFeatures>& mu) const;
};

struct LogisticOptions {
  double l2 = 1e-4;
  double lr = 0.1;
  int max_iterations = 2000;
  double grad_tolerance = 1e-5;
};

struct LogisticModel {
  std::array<std::array<double, kFeatures>, kDirections> weights{};
  std::array<double, kDirections> bias{};
  Standardizer standardizer;
  int iterations = 0;
  double final_loss = 0.0;
  std::vector<double> loss_history;

  std::array<double, kDirections> probabilities(const std::array<double, kFeatures>& mu) const;
  /// Argmax with ties broken towards the lowest class index.
  int predict(const std::array<double, kFeatures>& mu) const;
};

/// Multinomial logistic regression of direction by full-batch gradient
/// descent on L2-penalised mean cross-entropy. The step size halves whenever
/// a step would raise the loss. Throws std::invalid_argument on fewer than two classes.
LogisticModel fit_logistic(LabeledLatents train, const LogisticOptions& options = {});
double eval_logistic(const LogisticModel& model, LabeledLatents test);

enum class Target { X, Y };
int target_value(const LabeledLatent& r, Target target);

struct RidgeModel {
  std::array<double, kFeatures> weights{};  ///< on standardised features
  double bias = 0.0;
  double lambda = 1.0;
  Standardizer standardizer;

  double predict(const std::array<double, kFeatures>& mu) const;
};

/// Closed-form ridge on standardised features with a centred target; the
/// intercept is unpenalised. Requires more rows than features.
RidgeModel fit_ridge(LabeledLatents train, Target target, double lambda = 1.0);

struct R2Result {
  double r2 = 0.0;
  bool degenerate = false;  ///< test-target variance below 1e-12
};
R2Result eval_r2(const RidgeModel& model, LabeledLatents test, Target target);

struct ProbeResult {
  double direction_accuracy = 0.0;
  double x_r2 = 0.0;
  double y_r2 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct ProbeOptions {
  double train_fraction = 0.8;
  double ridge_lambda = 1.0;
  LogisticOptions logistic;
};

/// 80/20 split by the dataset's split seed, then all three probes on the test split.
ProbeResult run_probes(const collect::ProbeDataset& dataset, const ProbeOptions& options = {});

struct BaselineResult {
  std::vector<double> accuracies;  ///< one per seed
  double mean = 0.0;
  double std = 0.0;
};

/// Untrained encoders (one per seed) probed on freshly collected data.
BaselineResult random_encoder_baseline(const env::GridConfig& grid, std::span<const std::uint64_t> seeds,
                                       const collect::CollectOptions& collect_options,
                                       const ProbeOptions& probe_options = {});

using stats::TTestResult;
/// Welch test of two samples.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);
/// One-sample test against a fixed reference (e.g. a published baseline value).
TTestResult welch_t_test(std::span<const double> a, double reference);

}  // namespace geoworld::probe
