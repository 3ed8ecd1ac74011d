#include "geoworld/probe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

namespace geoworld::probe {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kStdFloor = 1e-8;

RowMatrix standardized_matrix(LabeledLatents rows, const Standardizer& s) {
  RowMatrix x(rows.size(), kFeatures);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < kFeatures; ++j) x(i, j) = (rows[i].mu[j] - s.mean[j]) / s.scale[j];
  }
  return x;
}

// Row-wise softmax of logits in place; returns mean cross-entropy against labels.
double softmax_cross_entropy(RowMatrix& logits, const std::vector<int>& labels) {
  double ce = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    const double z = row.sum();
    row /= z;
    ce -= std::log(std::max(row(labels[static_cast<std::size_t>(i)]), 1e-300));
  }
  return ce / static_cast<double>(logits.rows());
}

struct LogisticEval {
  double loss;
  RowMatrix probs;
};

LogisticEval logistic_objective(const RowMatrix& x, const std::vector<int>& labels, const RowMatrix& w,
                                const Eigen::RowVectorXd& b, double l2) {
  RowMatrix logits = x * w.transpose();
  logits.rowwise() += b;
  const double ce = softmax_cross_entropy(logits, labels);
  return {ce + 0.5 * l2 * w.squaredNorm(), std::move(logits)};
}

}  // namespace

Standardizer Standardizer::fit(LabeledLatents rows) {
  if (rows.empty()) throw std::invalid_argument("Standardizer::fit: no rows");
  Standardizer s;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < kFeatures; ++j) s.mean[j] += r.mu[j];
  }
  for (auto& m : s.mean) m /= n;
  std::array<double, kFeatures> ss{};
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < kFeatures; ++j) ss[j] += (r.mu[j] - s.mean[j]) * (r.mu[j] - s.mean[j]);
  }
  for (std::size_t j = 0; j < kFeatures; ++j) s.scale[j] = std::max(std::sqrt(ss[j] / n), kStdFloor);
  return s;
}

std::array<double, kFeatures> Standardizer::apply(const std::array<double, kFeatures>& mu) const {
  std::array<double, kFeatures> out{};
  for (std::size_t j = 0; j < kFeatures; ++j) out[j] = (mu[j] - mean[j]) / scale[j];
  return out;
}

std::array<double, kDirections> LogisticModel::probabilities(const std::array<double, kFeatures>& mu) const {
  const auto x = standardizer.apply(mu);
  std::array<double, kDirections> logits{};
  for (std::size_t k = 0; k < kDirections; ++k) {
    double v = bias[k];
    for (std::size_t j = 0; j < kFeatures; ++j) v += weights[k][j] * x[j];
    logits[k] = v;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& v : logits) z += (v = std::exp(v - m));
  for (auto& v : logits) v /= z;
  return logits;
}

int LogisticModel::predict(const std::array<double, kFeatures>& mu) const {
  const auto x = standardizer.apply(mu);
  int best = 0;
  double best_logit = -INFINITY;
  for (std::size_t k = 0; k < kDirections; ++k) {
    double v = bias[k];
    for (std::size_t j = 0; j < kFeatures; ++j) v += weights[k][j] * x[j];
    if (v > best_logit) {
      best_logit = v;
      best = static_cast<int>(k);
    }
  }
  return best;
}

LogisticModel fit_logistic(LabeledLatents train, const LogisticOptions& options) {
  std::set<int> classes;
  std::vector<int> labels;
  labels.reserve(train.size());
  for (const auto& r : train) {
    if (r.dir < 0 || r.dir >= static_cast<int>(kDirections)) throw std::invalid_argument("direction label out of range");
    classes.insert(r.dir);
    labels.push_back(r.dir);
  }
  if (classes.size() < 2) throw std::invalid_argument("fit_logistic: training set has fewer than two classes");

  LogisticModel model;
  model.standardizer = Standardizer::fit(train);
  const RowMatrix x = standardized_matrix(train, model.standardizer);
  const double n = static_cast<double>(train.size());
  RowMatrix onehot = RowMatrix::Zero(x.rows(), kDirections);
  for (std::size_t i = 0; i < labels.size(); ++i) onehot(static_cast<Eigen::Index>(i), labels[i]) = 1.0;

  RowMatrix w = RowMatrix::Zero(kDirections, kFeatures);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(kDirections);
  double lr = options.lr;
  auto current = logistic_objective(x, labels, w, b, options.l2);
  model.loss_history.push_back(current.loss);

  int it = 0;
  while (it < options.max_iterations) {
    const RowMatrix resid = current.probs - onehot;
    const RowMatrix grad_w = (resid.transpose() * x) / n + options.l2 * w;
    const Eigen::RowVectorXd grad_b = resid.colwise().sum() / n;
    const double gnorm = std::max(grad_w.cwiseAbs().maxCoeff(), grad_b.cwiseAbs().maxCoeff());
    if (gnorm < options.grad_tolerance) break;
    ++it;

    // Backtrack until the loss does not rise.
    for (int halvings = 0; halvings < 60; ++halvings) {
      RowMatrix w_next = w - lr * grad_w;
      Eigen::RowVectorXd b_next = b - lr * grad_b;
      auto next = logistic_objective(x, labels, w_next, b_next, options.l2);
      if (next.loss <= current.loss) {
        w = std::move(w_next);
        b = std::move(b_next);
        current = std::move(next);
        break;
      }
      lr *= 0.5;
    }
    model.loss_history.push_back(current.loss);
  }

  for (std::size_t k = 0; k < kDirections; ++k) {
    model.bias[k] = b(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < kFeatures; ++j) {
      model.weights[k][j] = w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    }
  }
  model.iterations = it;
  model.final_loss = current.loss;
  return model;
}

double eval_logistic(const LogisticModel& model, LabeledLatents test) {
  if (test.empty()) throw std::invalid_argument("eval_logistic: empty test set");
  std::size_t correct = 0;
  for (const auto& r : test) correct += model.predict(r.mu) == r.dir ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

int target_value(const LabeledLatent& r, Target target) { return target == Target::X ? r.x : r.y; }

double RidgeModel::predict(const std::array<double, kFeatures>& mu) const {
  const auto x = standardizer.apply(mu);
  double v = bias;
  for (std::size_t j = 0; j < kFeatures; ++j) v += weights[j] * x[j];
  return v;
}

RidgeModel fit_ridge(LabeledLatents train, Target target, double lambda) {
  if (train.size() <= kFeatures) throw std::invalid_argument("fit_ridge: need more rows than features (n >= 33)");
  if (!(lambda > 0.0)) throw std::invalid_argument("fit_ridge: lambda must be > 0");
  RidgeModel model;
  model.lambda = lambda;
  model.standardizer = Standardizer::fit(train);
  const RowMatrix x = standardized_matrix(train, model.standardizer);
  Eigen::VectorXd y(x.rows());
  for (std::size_t i = 0; i < train.size(); ++i) y(static_cast<Eigen::Index>(i)) = target_value(train[i], target);
  const double y_mean = y.mean();
  y.array() -= y_mean;

  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = x.transpose() * y;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("fit_ridge: singular normal equations");
  const Eigen::VectorXd w = llt.solve(rhs);
  for (std::size_t j = 0; j < kFeatures; ++j) model.weights[j] = w(static_cast<Eigen::Index>(j));
  model.bias = y_mean;
  return model;
}

R2Result eval_r2(const RidgeModel& model, LabeledLatents test, Target target) {
  if (test.empty()) throw std::invalid_argument("eval_r2: empty test set");
  double mean = 0.0;
  for (const auto& r : test) mean += target_value(r, target);
  mean /= static_cast<double>(test.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& r : test) {
    const double y = target_value(r, target);
    const double e = y - model.predict(r.mu);
    ss_res += e * e;
    ss_tot += (y - mean) * (y - mean);
  }
  if (ss_tot < 1e-12) return {0.0, true};
  return {1.0 - ss_res / ss_tot, false};
}

ProbeResult run_probes(const collect::ProbeDataset& dataset, const ProbeOptions& options) {
  const auto [train, test] = collect::split(dataset, options.train_fraction);
  ProbeResult r;
  r.n_train = train.size();
  r.n_test = test.size();
  r.direction_accuracy = eval_logistic(fit_logistic(train, options.logistic), test);
  r.x_r2 = eval_r2(fit_ridge(train, Target::X, options.ridge_lambda), test, Target::X).r2;
  r.y_r2 = eval_r2(fit_ridge(train, Target::Y, options.ridge_lambda), test, Target::Y).r2;
  return r;
}

BaselineResult random_encoder_baseline(const env::GridConfig& grid, std::span<const std::uint64_t> seeds,
                                       const collect::CollectOptions& collect_options,
                                       const ProbeOptions& probe_options) {
  BaselineResult out;
  for (const auto seed : seeds) {
    const auto params = wm::ModelParams::initialized(seed);
    const auto ds = collect::collect_pairs(params, grid, collect_options);
    const auto [train, test] = collect::split(ds, probe_options.train_fraction);
    out.accuracies.push_back(eval_logistic(fit_logistic(train, probe_options.logistic), test));
  }
  out.mean = stats::mean(out.accuracies);
  out.std = stats::stddev(out.accuracies);
  return out;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) { return stats::welch_t_test(a, b); }

TTestResult welch_t_test(std::span<const double> a, double reference) {
  return stats::one_sample_t_test(a, reference);
}

}  // namespace geoworld::probe
