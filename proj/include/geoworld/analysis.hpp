#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoworld/rsa.hpp"
#include "geoworld/stats.hpp"

namespace geoworld::analysis {

struct MetricRow {
  int step = 0;
  double prediction_loss = 0.0;
  double dir_acc = 0.0;
  double x_r2 = 0.0;
  double y_r2 = 0.0;
  double rsa_dir = 0.0;
  double rsa_pos = 0.0;
  double pairwise_dist = 0.0;
};

enum class Metric { PredictionLoss, DirAcc, XR2, YR2, RsaDir, RsaPos, PairwiseDist };
inline constexpr Metric kAllMetrics[] = {Metric::PredictionLoss, Metric::DirAcc, Metric::XR2,         Metric::YR2,
                                         Metric::RsaDir,         Metric::RsaPos, Metric::PairwiseDist};
const char* metric_name(Metric m);
double metric_value(const MetricRow& row, Metric m);

/// One row per checkpoint of a single run, steps strictly increasing.
struct MetricSeries {
  std::vector<MetricRow> rows;
  double beta = 0.0;
  std::string condition = "clean";
  std::string env = "empty8";
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> column(Metric m) const;
  std::vector<double> steps() const;
  const MetricRow& final_row() const;
};

struct Correlation {
  double r = 0.0;
  double p = 1.0;
  bool degenerate = false;
};

/// Spearman(prediction_loss, dir_acc) over checkpoints; needs >= 5 rows.
/// Throws stats::DegenerateStatistic if either column is constant.
Correlation h6_correlation(const MetricSeries& series);

/// Residualise prediction_loss and dir_acc on the step index (or log step)
/// by least squares, then Spearman of the residuals. Residuals that vanish
/// relative to the raw variation are reported as degenerate, not as a number.
Correlation detrended_partial_correlation(const MetricSeries& series, bool log_step = false);

struct KnockoutCriteria {
  double collapse_threshold = 1e-2;
  double chance = 0.25;
  double chance_margin = 0.05;
  /// Accuracy the low-beta arm must exceed; defaults to chance + chance_margin.
  std::optional<double> baseline_accuracy;
};

struct KnockoutArm {
  double beta = 0.0;
  MetricSeries series;
  bool collapsed = false;
  bool accuracy_near_chance = false;
  double final_dir_acc = 0.0;
  double final_pairwise_dist = 0.0;
};

struct KnockoutReport {
  std::vector<KnockoutArm> arms;  ///< ascending beta
  KnockoutCriteria criteria;
  /// Highest-beta arm collapsed and near chance while the lowest-beta arm is neither.
  bool double_knockout = false;
};

KnockoutReport knockout_compare(const std::map<double, MetricSeries>& series_by_beta,
                                const KnockoutCriteria& criteria = {});

struct AggregateRow {
  int step = 0;
  std::size_t n = 0;
  std::map<Metric, double> mean;
  std::map<Metric, double> std;
};

struct SeedAggregate {
  std::vector<AggregateRow> rows;
  std::optional<stats::TTestResult> final_dir_acc_vs_baseline;
};

/// Per-checkpoint mean and sample std across seeds; the checkpoint grids must
/// match. When a baseline sample is given, Welch-tests the final dir_acc against it.
SeedAggregate aggregate_seeds(const std::vector<MetricSeries>& runs,
                              const std::vector<double>& baseline_dir_acc = {});

}  // namespace geoworld::analysis
