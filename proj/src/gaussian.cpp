#include "geoworld/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace geoworld::nn {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

double gaussian_kl(std::span<const double> mu, std::span<const double> log_var) {
  require_same_length(mu.size(), log_var.size(), "gaussian_kl");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    kl += mu[i] * mu[i] + std::exp(log_var[i]) - log_var[i] - 1.0;
  }
  return 0.5 * kl;
}

KlGrads gaussian_kl_backward(std::span<const double> mu, std::span<const double> log_var) {
  require_same_length(mu.size(), log_var.size(), "gaussian_kl_backward");
  KlGrads g{std::vector<double>(mu.size()), std::vector<double>(mu.size())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    g.mu[i] = mu[i];
    g.log_var[i] = 0.5 * (std::exp(log_var[i]) - 1.0);
  }
  return g;
}

std::vector<double> standard_normal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::span<const double> noise) {
  require_same_length(mu.size(), log_var.size(), "reparameterize");
  require_same_length(mu.size(), noise.size(), "reparameterize");
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(0.5 * log_var[i]) * noise[i];
  return z;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::mt19937_64& rng) {
  const auto noise = standard_normal(mu.size(), rng);
  return reparameterize(mu, log_var, noise);
}

}  // namespace geoworld::nn
