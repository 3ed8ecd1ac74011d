#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "geoworld/checkpoint.hpp"

namespace geoworld::collect {

/// Encoder mean paired with the ground-truth pose it was rendered from.
struct LabeledLatent {
  std::array<double, wm::kLatentDim> mu{};
  int x = 0;
  int y = 0;
  int dir = 0;

  bool operator==(const LabeledLatent&) const = default;
};

struct ProbeDataset {
  std::vector<LabeledLatent> records;
  std::uint64_t split_seed = 0;
  int source_step = 0;
  std::string config_digest;
  env::Perturbation perturbation;
  std::uint64_t collect_seed = 0;
};

struct CollectOptions {
  int n_episodes = 200;
  env::Perturbation perturbation;
  std::uint64_t seed = 0;
  /// When set, the checkpoint's environment must match exactly.
  std::optional<env::GridConfig> expected_env;
};

class CollectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Random-policy exploration in the checkpoint's environment, storing the
/// encoder mean of the (optionally perturbed) observation at every visited
/// state together with its true pose. Records are ordered by (episode, step).
ProbeDataset collect_pairs(const wm::Checkpoint& ckpt, const CollectOptions& options);
ProbeDataset collect_pairs(const wm::ModelParams& params, const env::GridConfig& grid, const CollectOptions& options);

/// Deterministic shuffle by dataset.split_seed, then cut at round(fraction * n).
std::pair<std::vector<LabeledLatent>, std::vector<LabeledLatent>> split(const ProbeDataset& dataset,
                                                                         double train_fraction);

/// Uniform sample without replacement.
std::vector<LabeledLatent> subsample_states(const std::vector<LabeledLatent>& records, std::size_t n,
                                            std::mt19937_64& rng);

/// CSV (mu_0..mu_31,x,y,dir) plus a sidecar `<path>.meta` key/value file.
void save_dataset(const ProbeDataset& dataset, const std::filesystem::path& csv_path);
ProbeDataset load_dataset(const std::filesystem::path& csv_path);

}  // namespace geoworld::collect
