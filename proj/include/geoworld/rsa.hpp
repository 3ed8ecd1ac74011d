#pragma once

#include <array>
#include <span>
#include <vector>

#include "geoworld/collect.hpp"
#include "geoworld/stats.hpp"

namespace geoworld::rsa {

using collect::LabeledLatent;
using Latent = std::array<double, wm::kLatentDim>;

/// Symmetric n x n matrix, row-major.
struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
  /// Strict upper triangle, row-major (j > i).
  std::vector<double> upper_triangle() const;
};

struct RsaResult {
  double r = 0.0;
  double p = 1.0;
  std::size_t n_pairs = 0;
};

/// Zero-norm vectors have similarity 0 to everything else and 1 to themselves.
SimilarityMatrix cosine_matrix(std::span<const Latent> latents);
SimilarityMatrix cosine_matrix(std::span<const LabeledLatent> records);
/// 1 where direction labels agree, else 0.
SimilarityMatrix direction_matrix(std::span<const LabeledLatent> records);
/// 1 / (1 + Manhattan distance between cells).
SimilarityMatrix position_matrix(std::span<const LabeledLatent> records);

struct SpearmanResult {
  double r = 0.0;
  double p = 1.0;
};

/// Rank correlation with average ranks for ties; two-sided p from the
/// t approximation (|r| == 1 gives p = 0). Needs n >= 3 and non-constant
/// inputs, otherwise throws stats::DegenerateStatistic / std::invalid_argument.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Spearman correlation between the strict upper triangles.
RsaResult rsa_score(const SimilarityMatrix& latent_sim, const SimilarityMatrix& semantic_sim);

/// Mean Euclidean distance over all unordered pairs; needs n >= 2.
double mean_pairwise_distance(std::span<const Latent> latents);
double mean_pairwise_distance(std::span<const LabeledLatent> records);

/// Caveat attached to RSA reports: the pairs share states, so they are not independent.
inline constexpr const char* kPairDependenceCaveat =
    "pairs share states and are not independent; read r as an effect size";

}  // namespace geoworld::rsa
