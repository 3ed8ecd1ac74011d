#include "geoworld/rsa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace geoworld::rsa {
namespace {

std::vector<Latent> latents_of(std::span<const LabeledLatent> records) {
  std::vector<Latent> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.mu);
  return out;
}

double norm(const Latent& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> SimilarityMatrix::upper_triangle() const {
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.push_back(values[i * n + j]);
  }
  return out;
}

SimilarityMatrix cosine_matrix(std::span<const Latent> latents) {
  const std::size_t n = latents.size();
  SimilarityMatrix m{n, std::vector<double>(n * n, 0.0)};
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = norm(latents[i]);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double sim = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        double dot = 0.0;
        for (std::size_t k = 0; k < wm::kLatentDim; ++k) dot += latents[i][k] * latents[j][k];
        sim = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      }
      m(i, j) = m(j, i) = sim;
    }
  }
  return m;
}

SimilarityMatrix cosine_matrix(std::span<const LabeledLatent> records) {
  const auto latents = latents_of(records);
  return cosine_matrix(std::span<const Latent>(latents));
}

SimilarityMatrix direction_matrix(std::span<const LabeledLatent> records) {
  const std::size_t n = records.size();
  SimilarityMatrix m{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = records[i].dir == records[j].dir ? 1.0 : 0.0;
  }
  return m;
}

SimilarityMatrix position_matrix(std::span<const LabeledLatent> records) {
  const std::size_t n = records.size();
  SimilarityMatrix m{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const int d = std::abs(records[i].x - records[j].x) + std::abs(records[i].y - records[j].y);
      m(i, j) = 1.0 / (1.0 + d);
    }
  }
  return m;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("spearman: need n >= 3");
  const auto rx = stats::average_ranks(x);
  const auto ry = stats::average_ranks(y);
  SpearmanResult out;
  out.r = stats::pearson(rx, ry);
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::abs(out.r) >= 1.0) {
    out.p = 0.0;
  } else {
    const double t = out.r * std::sqrt(df / (1.0 - out.r * out.r));
    out.p = stats::student_t_two_sided_p(t, df);
  }
  return out;
}

RsaResult rsa_score(const SimilarityMatrix& latent_sim, const SimilarityMatrix& semantic_sim) {
  if (latent_sim.n != semantic_sim.n) throw std::invalid_argument("rsa_score: matrix sizes differ");
  if (latent_sim.n < 3) throw std::invalid_argument("rsa_score: need n >= 3");
  const auto a = latent_sim.upper_triangle();
  const auto b = semantic_sim.upper_triangle();
  const auto s = spearman(a, b);
  return {s.r, s.p, a.size()};
}

double mean_pairwise_distance(std::span<const Latent> latents) {
  const std::size_t n = latents.size();
  if (n < 2) throw std::invalid_argument("mean_pairwise_distance: need n >= 2");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < wm::kLatentDim; ++k) {
        const double d = latents[i][k] - latents[j][k];
        s += d * d;
      }
      total += std::sqrt(s);
    }
  }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double mean_pairwise_distance(std::span<const LabeledLatent> records) {
  const auto latents = latents_of(records);
  return mean_pairwise_distance(std::span<const Latent>(latents));
}

}  // namespace geoworld::rsa
