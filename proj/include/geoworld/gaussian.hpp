#pragma once

#include <random>
#include <span>
#include <vector>

namespace geoworld::nn {

/// KL(N(mu, exp(log_var)) || N(0, I)) summed over dimensions.
double gaussian_kl(std::span<const double> mu, std::span<const double> log_var);

struct KlGrads {
  std::vector<double> mu;
  std::vector<double> log_var;
};
KlGrads gaussian_kl_backward(std::span<const double> mu, std::span<const double> log_var);

/// Draws n independent N(0,1) values.
std::vector<double> standard_normal(std::size_t n, std::mt19937_64& rng);

/// mu + exp(0.5 log_var) * noise, with the noise supplied by the caller.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::span<const double> noise);
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::mt19937_64& rng);

}  // namespace geoworld::nn
