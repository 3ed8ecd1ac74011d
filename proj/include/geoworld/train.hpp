#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geoworld/adam.hpp"
#include "geoworld/gridworld.hpp"
#include "geoworld/keyvalue.hpp"
#include "geoworld/model.hpp"

namespace geoworld::wm {

struct TrainConfig {
  double beta = 0.001;
  int total_steps = 100000;
  double lr = 3e-4;
  int batch_size = 32;
  int buffer_capacity = 10000;
  std::vector<int> checkpoint_steps = {1000, 5000, 10000, 25000, 50000, 100000};
  std::uint64_t seed = 0;
  env::GridConfig env;
  env::Perturbation perturbation;
  int log_every = 1000;
  /// Differentiate the transition target mu(o_{t+1}); false stops the gradient there.
  bool target_gradient = true;

  /// Throws std::invalid_argument on any broken invariant.
  void validate() const;

  KeyValueDoc to_doc() const;
  /// Overlays the keys in `doc` on top of `base`; unknown keys are rejected by name.
  static TrainConfig from_doc(const KeyValueDoc& doc, TrainConfig base);
  static TrainConfig from_doc(const KeyValueDoc& doc);
  std::string digest() const;

  bool operator==(const TrainConfig&) const = default;
};

/// {every, 2*every, ...} up to and including total.
std::vector<int> every_n_steps(int total, int every);

struct Checkpoint {
  int step = 0;
  ModelParams params;
  std::vector<nn::AdamState> adam;  ///< one per ModelParams::tensors() entry
  TrainConfig train_config;
  std::string rng_state;

  bool operator==(const Checkpoint&) const = default;
};

struct TrainHooks {
  /// Append-only CSV (step,total,mse,kl); empty path disables logging.
  std::filesystem::path metrics_csv;
  std::function<void(const Checkpoint&)> on_checkpoint;
  bool keep_checkpoints = true;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(int step, const std::string& why);
  int step() const { return step_; }

 private:
  int step_;
};

/// Random-policy exploration with one Adam update per environment step on a
/// minibatch drawn from a FIFO replay buffer. Checkpoints are emitted at
/// config.checkpoint_steps and returned when hooks.keep_checkpoints is set.
std::vector<Checkpoint> train(const TrainConfig& config, const TrainHooks& hooks = {});

/// Fresh checkpoint at step 0 (untrained weights drawn from config.seed).
Checkpoint initial_checkpoint(const TrainConfig& config);

/// Transitions from a random policy under `seed`, with observations perturbed as in training.
std::vector<env::Transition> collect_transitions(const env::GridConfig& grid, const env::Perturbation& perturbation,
                                                 int n_episodes, std::uint64_t seed);

/// Held-out transition MSE of a checkpoint (encoder mean for z_t, no KL).
double prediction_loss_eval(const Checkpoint& ckpt, std::span<const env::Transition> heldout);

}  // namespace geoworld::wm
