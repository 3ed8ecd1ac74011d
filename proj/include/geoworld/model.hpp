#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "geoworld/gridworld.hpp"
#include "geoworld/layers.hpp"

namespace geoworld::wm {

inline constexpr std::size_t kLatentDim = 32;
inline constexpr std::size_t kEncoderHidden = 128;
inline constexpr std::size_t kTransitionHidden = 128;
inline constexpr std::size_t kConv1Channels = 16;
inline constexpr std::size_t kConv2Channels = 32;
inline constexpr std::size_t kConvOut = kConv2Channels * 3 * 3;
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Encoder q(z|o): conv(3->16) -> conv(16->32) -> fc(288->128) -> {mu, log_var} heads.
/// Transition p(z'|z,a): fc(32+7 -> 128) -> fc(128 -> 32). ReLU between layers.
struct ModelParams {
  nn::LayerParams conv1 = nn::LayerParams::conv3x3(env::Observation::kChannels, kConv1Channels);
  nn::LayerParams conv2 = nn::LayerParams::conv3x3(kConv1Channels, kConv2Channels);
  nn::LayerParams enc_fc = nn::LayerParams::dense(kConvOut, kEncoderHidden);
  nn::LayerParams enc_mu = nn::LayerParams::dense(kEncoderHidden, kLatentDim);
  nn::LayerParams enc_log_var = nn::LayerParams::dense(kEncoderHidden, kLatentDim);
  nn::LayerParams trans_fc1 = nn::LayerParams::dense(kLatentDim + env::kNumActions, kTransitionHidden);
  nn::LayerParams trans_fc2 = nn::LayerParams::dense(kTransitionHidden, kLatentDim);

  static ModelParams initialized(std::mt19937_64& rng);
  static ModelParams initialized(std::uint64_t seed);

  struct Named {
    std::string name;
    nn::Tensor* tensor;
  };
  struct NamedConst {
    std::string name;
    const nn::Tensor* tensor;
  };
  /// Every parameter tensor in a fixed canonical order.
  std::vector<Named> tensors();
  std::vector<NamedConst> tensors() const;
  std::size_t parameter_count() const;

  bool operator==(const ModelParams&) const = default;
};

struct Encoding {
  std::vector<double> mu;
  std::vector<double> log_var;  ///< clamped to [kLogVarMin, kLogVarMax]
};

/// Channel-first encoder input [N,3,7,7].
nn::Tensor to_encoder_input(std::span<const env::Observation> observations);

Encoding encode(const ModelParams& params, const env::Observation& obs);
/// Encoder means for many observations as an [N, 32] tensor, evaluated in chunks.
nn::Tensor encode_means(const ModelParams& params, std::span<const env::Observation> observations);

nn::Tensor one_hot_action(env::Action action);
std::vector<double> predict_next(const ModelParams& params, std::span<const double> z, env::Action action);
/// Batched transition forward pass: z [N,32], one action per row.
nn::Tensor predict_next_batch(const ModelParams& params, const nn::Tensor& z, std::span<const env::Action> actions);

struct LossBreakdown {
  double total = 0.0;
  double transition_mse = 0.0;
  double kl = 0.0;
};

struct LossAndGrads {
  LossBreakdown loss;
  ModelParams grads;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::string term, double value);
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

/// Whether the transition target mu(o_{t+1}) is differentiated (Through) or
/// treated as a constant (Stop).
enum class TargetGradient { Through, Stop };

/// Transition MSE (mean over batch and latent dims) + beta * KL (summed over dims,
/// mean over batch). z_t is sampled by reparameterisation; the target is the
/// encoder mean of o_{t+1}.
LossAndGrads compute_loss(const ModelParams& params, std::span<const env::Transition> batch, double beta,
                          std::mt19937_64& rng, TargetGradient target_gradient = TargetGradient::Through);
/// Same with the reparameterisation noise given explicitly as [B, 32].
LossAndGrads compute_loss(const ModelParams& params, std::span<const env::Transition> batch, double beta,
                          const nn::Tensor& noise, TargetGradient target_gradient = TargetGradient::Through);

/// Held-out transition MSE using the encoder mean for z_t; no KL term.
double prediction_loss(const ModelParams& params, std::span<const env::Transition> heldout);

}  // namespace geoworld::wm
