#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace geoworld::stats {

class DegenerateStatistic : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for a single value.
double stddev(std::span<const double> xs);

/// CDF of Student's t with `df` degrees of freedom, via the regularised
/// incomplete beta function.
double student_t_cdf(double t, double df);
/// P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Welch's unequal-variance two-sample t-test. Each sample needs n >= 2;
/// throws DegenerateStatistic when both variances are zero.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);
/// One-sample t-test of `a` against a fixed reference value.
TTestResult one_sample_t_test(std::span<const double> a, double reference);

/// 1-based average ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);
/// Pearson correlation; throws DegenerateStatistic on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace geoworld::stats
