#include "geoworld/model.hpp"

#include <algorithm>
#include <cmath>

#include "geoworld/gaussian.hpp"

namespace geoworld::wm {

using env::Action;
using env::Observation;
using nn::Tensor;

namespace {

constexpr std::size_t kEvalChunk = 1024;

struct EncoderTrace {
  Tensor input;
  Tensor conv1_pre;
  Tensor conv1_out;
  Tensor conv2_pre;
  Tensor flat;  // relu(conv2) as [N, 288]
  Tensor fc_pre;
  Tensor fc_out;
  Tensor mu;
  Tensor log_var_raw;
  Tensor log_var;
};

EncoderTrace encoder_forward(const ModelParams& p, Tensor input) {
  EncoderTrace t;
  t.input = std::move(input);
  const std::size_t n = t.input.dim(0);
  t.conv1_pre = nn::conv2d(t.input, p.conv1);
  t.conv1_out = nn::relu(t.conv1_pre);
  t.conv2_pre = nn::conv2d(t.conv1_out, p.conv2);
  t.flat = nn::relu(t.conv2_pre).reshaped({n, kConvOut});
  t.fc_pre = nn::linear(t.flat, p.enc_fc);
  t.fc_out = nn::relu(t.fc_pre);
  t.mu = nn::linear(t.fc_out, p.enc_mu);
  t.log_var_raw = nn::linear(t.fc_out, p.enc_log_var);
  t.log_var = t.log_var_raw;
  for (auto& v : t.log_var.values()) v = std::clamp(v, kLogVarMin, kLogVarMax);
  return t;
}

void assign(nn::LayerParams& dst, nn::LayerGrads& g) {
  dst.weights = std::move(g.weights);
  dst.bias = std::move(g.bias);
}

/// Accumulates encoder parameter gradients into `grads` from d(mu) and d(clamped log_var).
void encoder_backward(const ModelParams& p, const EncoderTrace& t, const Tensor& d_mu, const Tensor& d_log_var,
                      ModelParams& grads) {
  Tensor d_raw = d_log_var;
  for (std::size_t i = 0; i < d_raw.size(); ++i) {
    const double raw = t.log_var_raw[i];
    if (!(raw > kLogVarMin && raw < kLogVarMax)) d_raw[i] = 0.0;
  }
  auto g_mu = nn::linear_backward(t.fc_out, p.enc_mu, d_mu);
  auto g_lv = nn::linear_backward(t.fc_out, p.enc_log_var, d_raw);
  Tensor d_fc_out = std::move(g_mu.input);
  for (std::size_t i = 0; i < d_fc_out.size(); ++i) d_fc_out[i] += g_lv.input[i];
  assign(grads.enc_mu, g_mu);
  assign(grads.enc_log_var, g_lv);

  auto g_fc = nn::linear_backward(t.flat, p.enc_fc, nn::relu_backward(t.fc_pre, d_fc_out));
  assign(grads.enc_fc, g_fc);
  Tensor d_conv2_out = g_fc.input.reshaped(t.conv2_pre.shape());
  auto g_conv2 = nn::conv2d_backward(t.conv1_out, p.conv2, 1, nn::relu_backward(t.conv2_pre, d_conv2_out));
  assign(grads.conv2, g_conv2);
  auto g_conv1 = nn::conv2d_backward(t.input, p.conv1, 1, nn::relu_backward(t.conv1_pre, g_conv2.input));
  assign(grads.conv1, g_conv1);
}

Tensor transition_input(const Tensor& z, std::span<const Action> actions) {
  const std::size_t n = z.dim(0);
  constexpr std::size_t width = kLatentDim + env::kNumActions;
  Tensor input({n, width});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(z.data() + i * kLatentDim, kLatentDim, input.data() + i * width);
    input[i * width + kLatentDim + static_cast<std::size_t>(actions[i])] = 1.0;
  }
  return input;
}

std::vector<Action> batch_actions(std::span<const env::Transition> batch) {
  std::vector<Action> actions;
  actions.reserve(batch.size());
  for (const auto& t : batch) actions.push_back(t.action);
  return actions;
}

std::vector<Observation> gather(std::span<const env::Transition> batch, bool next) {
  std::vector<Observation> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back(next ? t.next_obs : t.obs);
  return out;
}

void check_finite(const char* term, double value) {
  if (!std::isfinite(value)) throw NonFiniteLoss(term, value);
}

}  // namespace

NonFiniteLoss::NonFiniteLoss(std::string term, double value)
    : std::runtime_error("non-finite " + term + " loss term (" + std::to_string(value) + ")"), term_(std::move(term)) {}

ModelParams ModelParams::initialized(std::mt19937_64& rng) {
  ModelParams p;
  for (auto* layer : {&p.conv1, &p.conv2, &p.enc_fc, &p.enc_mu, &p.enc_log_var, &p.trans_fc1, &p.trans_fc2}) {
    layer->init_uniform(rng);
  }
  return p;
}

ModelParams ModelParams::initialized(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return initialized(rng);
}

std::vector<ModelParams::Named> ModelParams::tensors() {
  std::vector<Named> out;
  const std::pair<const char*, nn::LayerParams*> layers[] = {
      {"conv1", &conv1},       {"conv2", &conv2},         {"enc_fc", &enc_fc},       {"enc_mu", &enc_mu},
      {"enc_log_var", &enc_log_var}, {"trans_fc1", &trans_fc1}, {"trans_fc2", &trans_fc2}};
  for (const auto& [name, layer] : layers) {
    out.push_back({std::string(name) + ".weight", &layer->weights});
    out.push_back({std::string(name) + ".bias", &layer->bias});
  }
  return out;
}

std::vector<ModelParams::NamedConst> ModelParams::tensors() const {
  std::vector<NamedConst> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->tensors()) out.push_back({name, t});
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& nt : tensors()) n += nt.tensor->size();
  return n;
}

Tensor to_encoder_input(std::span<const Observation> observations) {
  constexpr int v = Observation::kView;
  constexpr int c = Observation::kChannels;
  Tensor input({observations.size(), std::size_t{c}, std::size_t{v}, std::size_t{v}});
  double* dst = input.data();
  for (const auto& obs : observations) {
    for (int ch = 0; ch < c; ++ch) {
      for (int r = 0; r < v; ++r) {
        for (int col = 0; col < v; ++col) *dst++ = obs.at(r, col, ch);
      }
    }
  }
  return input;
}

Encoding encode(const ModelParams& params, const Observation& obs) {
  const auto t = encoder_forward(params, to_encoder_input(std::span(&obs, 1)));
  return {t.mu.storage(), t.log_var.storage()};
}

Tensor encode_means(const ModelParams& params, std::span<const Observation> observations) {
  if (observations.empty()) throw std::invalid_argument("encode_means: no observations");
  Tensor out({observations.size(), kLatentDim});
  for (std::size_t start = 0; start < observations.size(); start += kEvalChunk) {
    const auto chunk = observations.subspan(start, std::min(kEvalChunk, observations.size() - start));
    const auto t = encoder_forward(params, to_encoder_input(chunk));
    std::copy(t.mu.storage().begin(), t.mu.storage().end(), out.data() + start * kLatentDim);
  }
  return out;
}

Tensor one_hot_action(Action action) {
  Tensor t({static_cast<std::size_t>(env::kNumActions)});
  t[static_cast<std::size_t>(action)] = 1.0;
  return t;
}

Tensor predict_next_batch(const ModelParams& params, const Tensor& z, std::span<const Action> actions) {
  if (z.rank() != 2 || z.dim(1) != kLatentDim || z.dim(0) != actions.size()) {
    throw std::invalid_argument("predict_next_batch: expected z [N,32] with N actions");
  }
  const Tensor hidden = nn::relu(nn::linear(transition_input(z, actions), params.trans_fc1));
  return nn::linear(hidden, params.trans_fc2);
}

std::vector<double> predict_next(const ModelParams& params, std::span<const double> z, Action action) {
  if (z.size() != kLatentDim) throw std::invalid_argument("predict_next: z must have 32 entries");
  const Tensor zt({1, kLatentDim}, std::vector<double>(z.begin(), z.end()));
  return predict_next_batch(params, zt, std::span(&action, 1)).storage();
}

LossAndGrads compute_loss(const ModelParams& params, std::span<const env::Transition> batch, double beta,
                          std::mt19937_64& rng, TargetGradient target_gradient) {
  if (batch.empty()) throw std::invalid_argument("compute_loss: empty batch");
  Tensor noise({batch.size(), kLatentDim});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : noise.values()) v = dist(rng);
  return compute_loss(params, batch, beta, noise, target_gradient);
}

LossAndGrads compute_loss(const ModelParams& params, std::span<const env::Transition> batch, double beta,
                          const Tensor& noise, TargetGradient target_gradient) {
  if (batch.empty()) throw std::invalid_argument("compute_loss: empty batch");
  const std::size_t n = batch.size();
  if (noise.size() != n * kLatentDim) throw std::invalid_argument("compute_loss: noise must be [B,32]");

  // Rows [0, n) encode o_t, rows [n, 2n) encode o_{t+1}; one pass serves both.
  auto obs = gather(batch, false);
  const auto next_obs = gather(batch, true);
  obs.insert(obs.end(), next_obs.begin(), next_obs.end());
  const auto actions = batch_actions(batch);

  const EncoderTrace enc = encoder_forward(params, to_encoder_input(obs));
  const double* target = enc.mu.data() + n * kLatentDim;

  Tensor z({n, kLatentDim});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = enc.mu[i] + std::exp(0.5 * enc.log_var[i]) * noise[i];

  const Tensor trans_in = transition_input(z, actions);
  const Tensor hidden_pre = nn::linear(trans_in, params.trans_fc1);
  const Tensor hidden = nn::relu(hidden_pre);
  const Tensor pred = nn::linear(hidden, params.trans_fc2);

  const double scale = 1.0 / static_cast<double>(n * kLatentDim);
  double sq = 0.0;
  Tensor d_pred(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    sq += diff * diff;
    d_pred[i] = 2.0 * diff * scale;
  }

  double kl_sum = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    kl_sum += nn::gaussian_kl(std::span(enc.mu.data() + b * kLatentDim, kLatentDim),
                              std::span(enc.log_var.data() + b * kLatentDim, kLatentDim));
  }

  LossAndGrads out;
  out.loss.transition_mse = sq * scale;
  out.loss.kl = kl_sum / static_cast<double>(n);
  out.loss.total = out.loss.transition_mse + beta * out.loss.kl;
  check_finite("transition_mse", out.loss.transition_mse);
  check_finite("kl", out.loss.kl);
  check_finite("total", out.loss.total);

  auto g2 = nn::linear_backward(hidden, params.trans_fc2, d_pred);
  assign(out.grads.trans_fc2, g2);
  auto g1 = nn::linear_backward(trans_in, params.trans_fc1, nn::relu_backward(hidden_pre, g2.input));
  assign(out.grads.trans_fc1, g1);

  constexpr std::size_t width = kLatentDim + env::kNumActions;
  const double kl_scale = beta / static_cast<double>(n);
  Tensor d_mu({2 * n, kLatentDim});
  Tensor d_log_var({2 * n, kLatentDim});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < kLatentDim; ++j) {
      const std::size_t i = b * kLatentDim + j;
      const double dz = g1.input[b * width + j];
      const double sigma = std::exp(0.5 * enc.log_var[i]);
      d_mu[i] = dz + kl_scale * enc.mu[i];
      d_log_var[i] = dz * noise[i] * 0.5 * sigma + kl_scale * 0.5 * (std::exp(enc.log_var[i]) - 1.0);
      if (target_gradient == TargetGradient::Through) d_mu[n * kLatentDim + i] = -d_pred[i];
    }
  }
  encoder_backward(params, enc, d_mu, d_log_var, out.grads);
  return out;
}

double prediction_loss(const ModelParams& params, std::span<const env::Transition> heldout) {
  if (heldout.empty()) throw std::invalid_argument("prediction_loss: empty held-out set");
  double sq = 0.0;
  for (std::size_t start = 0; start < heldout.size(); start += kEvalChunk) {
    const auto chunk = heldout.subspan(start, std::min(kEvalChunk, heldout.size() - start));
    const auto obs = gather(chunk, false);
    const auto next_obs = gather(chunk, true);
    const Tensor z = encode_means(params, obs);
    const Tensor target = encode_means(params, next_obs);
    const Tensor pred = predict_next_batch(params, z, batch_actions(chunk));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - target[i];
      sq += d * d;
    }
  }
  return sq / static_cast<double>(heldout.size() * kLatentDim);
}

}  // namespace geoworld::wm
