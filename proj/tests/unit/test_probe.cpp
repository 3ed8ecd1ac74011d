#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "geoworld/probe.hpp"

using namespace geoworld;
using collect::LabeledLatent;

namespace {

// Four well-separated direction clusters on the first two features, noise elsewhere.
std::vector<LabeledLatent> separable(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  const double cx[4] = {3, 0, -3, 0}, cy[4] = {0, 3, 0, -3};
  std::vector<LabeledLatent> out;
  for (int d = 0; d < 4; ++d)
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledLatent r;
      r.dir = d;
      for (auto& v : r.mu) v = n(rng);
      r.mu[0] += cx[d];
      r.mu[1] += cy[d];
      out.push_back(r);
    }
  return out;
}

std::vector<LabeledLatent> linear_positions(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cell(1, 6);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<LabeledLatent> out(n);
  for (auto& r : out) {
    r.x = cell(rng);
    r.y = cell(rng);
    for (auto& v : r.mu) v = noise(rng);
    r.mu[3] = 2.0 * r.x + 0.1 * noise(rng);
    r.mu[7] = -r.y + 0.5 * r.mu[3] + 0.1 * noise(rng);
  }
  return out;
}

}  // namespace

TEST_CASE("logistic probe separates a separable toy set") {
  const auto train = separable(50, 1);
  const auto model = probe::fit_logistic(train);
  CHECK(probe::eval_logistic(model, train) == 1.0);
  CHECK(probe::eval_logistic(model, separable(50, 2)) == 1.0);
}

TEST_CASE("logistic training loss never increases") {
  const auto model = probe::fit_logistic(separable(30, 3));
  REQUIRE(model.loss_history.size() > 1);
  for (std::size_t i = 1; i < model.loss_history.size(); ++i)
    CHECK(model.loss_history[i] <= model.loss_history[i - 1] + 1e-15);
  CHECK(model.final_loss == model.loss_history.back());
}

TEST_CASE("probabilities sum to one and ties go to the lowest class") {
  probe::LogisticModel m;
  m.standardizer.scale.fill(1.0);
  std::array<double, probe::kFeatures> mu{};
  const auto p = m.probabilities(mu);
  CHECK(p[0] + p[1] + p[2] + p[3] == doctest::Approx(1.0));
  CHECK(m.predict(mu) == 0);
}

TEST_CASE("shuffled labels give chance accuracy") {
  auto train = separable(250, 4);
  auto test = separable(250, 5);
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> d(0, 3);
  for (auto& r : train) r.dir = d(rng);
  for (auto& r : test) r.dir = d(rng);
  CHECK(std::abs(probe::eval_logistic(probe::fit_logistic(train), test) - 0.25) < 0.06);
}

TEST_CASE("duplicating every training row leaves the probe unchanged") {
  const auto train = separable(20, 7);
  auto twice = train;
  twice.insert(twice.end(), train.begin(), train.end());
  const auto a = probe::fit_logistic(train);
  const auto b = probe::fit_logistic(twice);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < probe::kFeatures; ++j)
      CHECK(a.weights[k][j] == doctest::Approx(b.weights[k][j]).epsilon(1e-8).scale(1e-10));
}

TEST_CASE("row order does not change the fitted probes") {
  auto train = linear_positions(300, 8);
  auto shuffled = train;
  std::mt19937_64 rng(9);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& r : train) r.dir = (r.x + r.y) % 4;
  for (auto& r : shuffled) r.dir = (r.x + r.y) % 4;
  const auto a = probe::fit_logistic(train);
  const auto b = probe::fit_logistic(shuffled);
  CHECK(probe::eval_logistic(a, train) == probe::eval_logistic(b, train));
  const auto ra = probe::fit_ridge(train, probe::Target::Y);
  const auto rb = probe::fit_ridge(shuffled, probe::Target::Y);
  for (std::size_t j = 0; j < probe::kFeatures; ++j) CHECK(ra.weights[j] == doctest::Approx(rb.weights[j]));
}

TEST_CASE("logistic probe needs two classes") {
  auto train = separable(10, 10);
  for (auto& r : train) r.dir = 2;
  CHECK_THROWS_AS(probe::fit_logistic(train), std::invalid_argument);
}

TEST_CASE("ridge solution satisfies its normal equations") {
  const auto train = linear_positions(400, 11);
  const double lambda = 1.0;
  for (auto target : {probe::Target::X, probe::Target::Y}) {
    const auto m = probe::fit_ridge(train, target, lambda);
    // Rebuild the standardised design by hand.
    const std::size_t n = train.size(), p = probe::kFeatures;
    std::vector<double> mean(p, 0.0), sd(p, 0.0);
    for (const auto& r : train)
      for (std::size_t j = 0; j < p; ++j) mean[j] += r.mu[j] / n;
    for (const auto& r : train)
      for (std::size_t j = 0; j < p; ++j) sd[j] += (r.mu[j] - mean[j]) * (r.mu[j] - mean[j]) / n;
    double ymean = 0.0;
    for (const auto& r : train) ymean += probe::target_value(r, target) / static_cast<double>(n);
    CHECK(m.bias == doctest::Approx(ymean));
    std::vector<std::vector<double>> xs(n, std::vector<double>(p));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) xs[i][j] = (train[i].mu[j] - m.standardizer.mean[j]) / m.standardizer.scale[j];
    // X^T (y - X w) - lambda w = 0
    double worst = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double g = -lambda * m.weights[j];
      for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t k = 0; k < p; ++k) fit += xs[i][k] * m.weights[k];
        g += xs[i][j] * (probe::target_value(train[i], target) - ymean - fit);
      }
      worst = std::max(worst, std::abs(g));
    }
    CHECK(worst < 1e-8);
    for (std::size_t j = 0; j < p; ++j) {
      CHECK(m.standardizer.mean[j] == doctest::Approx(mean[j]).epsilon(1e-12));
      CHECK(m.standardizer.scale[j] == doctest::Approx(std::sqrt(sd[j])).epsilon(1e-9));
    }
    CHECK(probe::eval_r2(m, linear_positions(200, 12), target).r2 > 0.95);
  }
}

TEST_CASE("r2 degenerate target and argument checks") {
  auto rows = linear_positions(100, 13);
  const auto m = probe::fit_ridge(rows, probe::Target::X);
  for (auto& r : rows) r.x = 3;
  const auto r2 = probe::eval_r2(m, rows, probe::Target::X);
  CHECK(r2.degenerate);
  CHECK(r2.r2 == 0.0);
  CHECK_THROWS(probe::fit_ridge(linear_positions(20, 14), probe::Target::X));
  CHECK_THROWS(probe::fit_ridge(linear_positions(100, 14), probe::Target::X, 0.0));
}

TEST_CASE("standardizer uses the training rows only and floors the scale") {
  auto rows = linear_positions(50, 15);
  for (auto& r : rows) r.mu[10] = 4.0;
  const auto s = probe::Standardizer::fit(rows);
  CHECK(s.mean[10] == 4.0);
  CHECK(s.scale[10] == 1e-8);
}

TEST_CASE("run_probes on a dataset with planted structure") {
  collect::ProbeDataset ds;
  ds.records = linear_positions(1000, 16);
  for (auto& r : ds.records) {
    r.dir = (r.x + r.y) % 4;
    r.mu[20] = r.dir == 0 ? 3.0 : r.dir == 1 ? -3.0 : 0.0;
    r.mu[21] = r.dir == 2 ? 3.0 : r.dir == 3 ? -3.0 : 0.0;
  }
  ds.split_seed = 17;
  const auto res = probe::run_probes(ds);
  CHECK(res.n_train == 800);
  CHECK(res.n_test == 200);
  CHECK(res.direction_accuracy == 1.0);
  CHECK(res.x_r2 > 0.95);
  CHECK(res.y_r2 > 0.95);
}

TEST_CASE("random-encoder baseline reports one accuracy per seed") {
  collect::CollectOptions o;
  o.n_episodes = 10;
  const std::vector<std::uint64_t> seeds{0, 1};
  const auto b = probe::random_encoder_baseline(env::GridConfig::empty8(), seeds, o);
  REQUIRE(b.accuracies.size() == 2);
  CHECK(b.mean == doctest::Approx((b.accuracies[0] + b.accuracies[1]) / 2));
  for (double a : b.accuracies) {
    CHECK(a > 0.2);
    CHECK(a < 0.9);
  }
}
