#include "geoworld/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geoworld::analysis {
namespace {

constexpr std::size_t kMinCheckpoints = 5;

// Least-squares residuals of y on [1, t].
std::vector<double> linear_residuals(const std::vector<double>& t, const std::vector<double>& y) {
  const double mt = stats::mean(t);
  const double my = stats::mean(y);
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
  }
  if (stt == 0.0) throw stats::DegenerateStatistic("detrending: constant step column");
  const double slope = sty / stt;
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - (my + slope * (t[i] - mt));
  return r;
}

bool negligible(const std::vector<double>& residuals, const std::vector<double>& raw) {
  const double m = stats::mean(raw);
  double ss_raw = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ss_raw += (raw[i] - m) * (raw[i] - m);
    ss_res += residuals[i] * residuals[i];
  }
  return ss_res <= 1e-20 * std::max(ss_raw, 1.0);
}

}  // namespace

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::PredictionLoss: return "pred_loss";
    case Metric::DirAcc: return "dir_acc";
    case Metric::XR2: return "x_r2";
    case Metric::YR2: return "y_r2";
    case Metric::RsaDir: return "rsa_dir";
    case Metric::RsaPos: return "rsa_pos";
    case Metric::PairwiseDist: return "pairwise_dist";
  }
  return "?";
}

double metric_value(const MetricRow& row, Metric m) {
  switch (m) {
    case Metric::PredictionLoss: return row.prediction_loss;
    case Metric::DirAcc: return row.dir_acc;
    case Metric::XR2: return row.x_r2;
    case Metric::YR2: return row.y_r2;
    case Metric::RsaDir: return row.rsa_dir;
    case Metric::RsaPos: return row.rsa_pos;
    case Metric::PairwiseDist: return row.pairwise_dist;
  }
  return 0.0;
}

void MetricSeries::validate() const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].step <= rows[i - 1].step) throw std::invalid_argument("MetricSeries steps must be strictly increasing");
  }
}

std::vector<double> MetricSeries::column(Metric m) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(metric_value(r, m));
  return out;
}

std::vector<double> MetricSeries::steps() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.step);
  return out;
}

const MetricRow& MetricSeries::final_row() const {
  if (rows.empty()) throw std::invalid_argument("MetricSeries is empty");
  return rows.back();
}

Correlation h6_correlation(const MetricSeries& series) {
  series.validate();
  if (series.rows.size() < kMinCheckpoints) throw std::invalid_argument("h6_correlation: need at least 5 checkpoints");
  const auto s = rsa::spearman(series.column(Metric::PredictionLoss), series.column(Metric::DirAcc));
  return {s.r, s.p, false};
}

Correlation detrended_partial_correlation(const MetricSeries& series, bool log_step) {
  series.validate();
  if (series.rows.size() < kMinCheckpoints) {
    throw std::invalid_argument("detrended_partial_correlation: need at least 5 checkpoints");
  }
  auto t = series.steps();
  if (log_step) {
    for (auto& v : t) v = std::log(v);
  }
  const auto loss = series.column(Metric::PredictionLoss);
  const auto acc = series.column(Metric::DirAcc);
  const auto loss_res = linear_residuals(t, loss);
  const auto acc_res = linear_residuals(t, acc);
  if (negligible(loss_res, loss) || negligible(acc_res, acc)) return {0.0, 1.0, true};
  try {
    const auto s = rsa::spearman(loss_res, acc_res);
    return {s.r, s.p, false};
  } catch (const stats::DegenerateStatistic&) {
    return {0.0, 1.0, true};
  }
}

KnockoutReport knockout_compare(const std::map<double, MetricSeries>& series_by_beta,
                                const KnockoutCriteria& criteria) {
  if (series_by_beta.size() < 2) throw std::invalid_argument("knockout_compare: need series for at least two betas");
  KnockoutReport report;
  report.criteria = criteria;
  for (const auto& [beta, series] : series_by_beta) {
    const auto& last = series.final_row();
    KnockoutArm arm;
    arm.beta = beta;
    arm.series = series;
    arm.final_dir_acc = last.dir_acc;
    arm.final_pairwise_dist = last.pairwise_dist;
    arm.collapsed = last.pairwise_dist < criteria.collapse_threshold;
    arm.accuracy_near_chance = std::abs(last.dir_acc - criteria.chance) < criteria.chance_margin;
    report.arms.push_back(std::move(arm));
  }
  const auto& low = report.arms.front();
  const auto& high = report.arms.back();
  const double baseline = criteria.baseline_accuracy.value_or(criteria.chance + criteria.chance_margin);
  report.double_knockout =
      high.collapsed && high.accuracy_near_chance && !low.collapsed && low.final_dir_acc > baseline;
  return report;
}

SeedAggregate aggregate_seeds(const std::vector<MetricSeries>& runs, const std::vector<double>& baseline_dir_acc) {
  if (runs.size() < 2) throw std::invalid_argument("aggregate_seeds: need at least two seeds");
  const auto grid = runs.front().steps();
  for (const auto& r : runs) {
    r.validate();
    if (r.steps() != grid) throw std::invalid_argument("aggregate_seeds: mismatched checkpoint grids");
  }
  SeedAggregate out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    AggregateRow row;
    row.step = runs.front().rows[i].step;
    row.n = runs.size();
    for (const auto m : kAllMetrics) {
      std::vector<double> sample;
      for (const auto& r : runs) sample.push_back(metric_value(r.rows[i], m));
      row.mean[m] = stats::mean(sample);
      row.std[m] = stats::stddev(sample);
    }
    out.rows.push_back(std::move(row));
  }
  if (!baseline_dir_acc.empty() && !grid.empty()) {
    std::vector<double> finals;
    for (const auto& r : runs) finals.push_back(r.final_row().dir_acc);
    out.final_dir_acc_vs_baseline =
        baseline_dir_acc.size() >= 2 ? stats::welch_t_test(finals, baseline_dir_acc)
                                     : stats::one_sample_t_test(finals, baseline_dir_acc.front());
  }
  return out;
}

}  // namespace geoworld::analysis
