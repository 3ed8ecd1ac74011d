#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "../support/reference.hpp"
#include "geoworld/analysis.hpp"

using namespace geoworld;
using analysis::MetricRow;
using analysis::MetricSeries;

namespace {

MetricSeries series_from(const std::vector<double>& loss, const std::vector<double>& acc) {
  MetricSeries s;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    MetricRow r;
    r.step = static_cast<int>((i + 1) * 1000);
    r.prediction_loss = loss[i];
    r.dir_acc = acc[i];
    s.rows.push_back(r);
  }
  return s;
}

MetricSeries final_only(double acc, double dist) {
  MetricSeries s;
  MetricRow r;
  r.step = 1000;
  r.dir_acc = acc;
  r.pairwise_dist = dist;
  s.rows.push_back(r);
  return s;
}

}  // namespace

TEST_CASE("h6 correlation of a perfectly anti-ordered series") {
  const auto s = series_from({5, 4, 3, 2, 1, 0.5}, {0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  const auto c = analysis::h6_correlation(s);
  CHECK(c.r == doctest::Approx(-1.0));
  CHECK(c.p == 0.0);
  CHECK_FALSE(c.degenerate);
}

TEST_CASE("h6 correlation matches brute force and needs five checkpoints") {
  const std::vector<double> loss{0.9, 0.7, 0.8, 0.3, 0.4, 0.2, 0.25}, acc{0.3, 0.5, 0.35, 0.6, 0.55, 0.7, 0.5};
  CHECK(analysis::h6_correlation(series_from(loss, acc)).r ==
        doctest::Approx(ref::brute_spearman(loss, acc)).epsilon(1e-12));
  CHECK_THROWS(analysis::h6_correlation(series_from({1, 2, 3, 4}, {4, 3, 2, 1})));
  auto bad = series_from(loss, acc);
  bad.rows[3].step = bad.rows[2].step;
  CHECK_THROWS(analysis::h6_correlation(bad));
}

TEST_CASE("detrending removes a shared monotone trend") {
  // Both metrics are exactly linear in the step: nothing is left after detrending.
  std::vector<double> loss, acc;
  for (int i = 1; i <= 10; ++i) {
    loss.push_back(1.0 - 0.05 * i);
    acc.push_back(0.3 + 0.02 * i);
  }
  const auto s = series_from(loss, acc);
  CHECK(analysis::h6_correlation(s).r == doctest::Approx(-1.0));
  CHECK(analysis::detrended_partial_correlation(s).degenerate);
}

TEST_CASE("detrended correlation sees fluctuations around the trend") {
  std::vector<double> loss, acc;
  const double wiggle[] = {0.1, -0.2, 0.05, 0.15, -0.1, -0.05, 0.2, -0.15};
  for (int i = 0; i < 8; ++i) {
    loss.push_back(1.0 - 0.1 * i + 0.03 * wiggle[i]);
    acc.push_back(0.3 + 0.05 * i - 0.02 * wiggle[i]);
  }
  const auto s = series_from(loss, acc);
  const auto partial = analysis::detrended_partial_correlation(s);
  CHECK_FALSE(partial.degenerate);
  CHECK(partial.r == doctest::Approx(-1.0));
  CHECK_FALSE(analysis::detrended_partial_correlation(s, true).degenerate);
}

TEST_CASE("knockout flags collapse and chance accuracy per arm") {
  std::map<double, MetricSeries> arms{{0.1, final_only(0.26, 1e-4)}, {0.001, final_only(0.62, 0.4)}};
  const auto rep = analysis::knockout_compare(arms);
  REQUIRE(rep.arms.size() == 2);
  CHECK(rep.arms[0].beta == 0.001);
  CHECK_FALSE(rep.arms[0].collapsed);
  CHECK(rep.arms[1].collapsed);
  CHECK(rep.arms[1].accuracy_near_chance);
  CHECK(rep.double_knockout);

  arms[0.1] = final_only(0.45, 1e-4);  // collapsed but still decodable
  CHECK_FALSE(analysis::knockout_compare(arms).double_knockout);
  arms[0.1] = final_only(0.25, 0.5);  // chance but not collapsed
  CHECK_FALSE(analysis::knockout_compare(arms).double_knockout);

  analysis::KnockoutCriteria wide;
  wide.chance_margin = 0.10;
  wide.baseline_accuracy = 0.60;
  arms[0.1] = final_only(0.34, 5e-3);
  CHECK(analysis::knockout_compare(arms, wide).double_knockout);
  arms[0.001] = final_only(0.58, 0.4);
  CHECK_FALSE(analysis::knockout_compare(arms, wide).double_knockout);

  CHECK_THROWS(analysis::knockout_compare({{0.1, final_only(0.25, 0.0)}}));
}

TEST_CASE("seed aggregation: means, sample std and the baseline test") {
  std::vector<MetricSeries> runs;
  for (double a : {0.5, 0.6, 0.7}) runs.push_back(series_from({1, 0.5}, {a - 0.1, a}));
  const auto agg = analysis::aggregate_seeds(runs, {0.45, 0.5, 0.55});
  REQUIRE(agg.rows.size() == 2);
  CHECK(agg.rows[1].mean.at(analysis::Metric::DirAcc) == doctest::Approx(0.6));
  CHECK(agg.rows[1].std.at(analysis::Metric::DirAcc) == doctest::Approx(0.1));
  CHECK(agg.rows[1].n == 3);
  REQUIRE(agg.final_dir_acc_vs_baseline.has_value());
  CHECK(agg.final_dir_acc_vs_baseline->t > 0.0);

  runs[1].rows[1].step = 3000;
  CHECK_THROWS(analysis::aggregate_seeds(runs));
  CHECK_THROWS(analysis::aggregate_seeds({runs[0]}));
}

TEST_CASE("metric names are stable") {
  CHECK(std::string(analysis::metric_name(analysis::Metric::DirAcc)) == "dir_acc");
  CHECK(std::string(analysis::metric_name(analysis::Metric::PredictionLoss)) == "pred_loss");
  CHECK(std::string(analysis::metric_name(analysis::Metric::PairwiseDist)) == "pairwise_dist");
}
