#include "geoworld/train.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geoworld::wm {
namespace {

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, std::string_view what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(static_cast<int>(parse_int(piece, what)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string rng_state_of(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

/// Fixed-capacity FIFO; once full the oldest transition is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) { items_.reserve(capacity); }

  void push(env::Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  const env::Transition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<env::Transition> items_;
};

class MetricsLog {
 public:
  MetricsLog(const std::filesystem::path& path, const std::string& digest) {
    if (path.empty()) return;
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open metrics log " + path.string());
    if (fresh) out_ << "# geoworld " << GEOWORLD_VERSION << " config=" << digest << "\nstep,total,mse,kl\n";
  }

  void write(int step, const LossBreakdown& loss) {
    if (!out_.is_open()) return;
    out_ << step << ',' << format_double(loss.total) << ',' << format_double(loss.transition_mse) << ','
         << format_double(loss.kl) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

void TrainConfig::validate() const {
  env.validate();
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
  if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
  if (!std::is_sorted(checkpoint_steps.begin(), checkpoint_steps.end()) ||
      std::adjacent_find(checkpoint_steps.begin(), checkpoint_steps.end()) != checkpoint_steps.end()) {
    throw std::invalid_argument("checkpoint_steps must be strictly increasing");
  }
  for (int s : checkpoint_steps) {
    if (s < 1 || s > total_steps) throw std::invalid_argument("checkpoint step " + std::to_string(s) + " outside [1, total_steps]");
  }
}

KeyValueDoc TrainConfig::to_doc() const {
  KeyValueDoc doc;
  doc.set("train", "beta", format_double(beta));
  doc.set("train", "total_steps", std::to_string(total_steps));
  doc.set("train", "lr", format_double(lr));
  doc.set("train", "batch_size", std::to_string(batch_size));
  doc.set("train", "buffer_capacity", std::to_string(buffer_capacity));
  doc.set("train", "checkpoint_steps", join_ints(checkpoint_steps));
  doc.set("train", "seed", std::to_string(seed));
  doc.set("train", "log_every", std::to_string(log_every));
  doc.set("train", "perturbation", perturbation.label());
  doc.set("train", "target_gradient", target_gradient ? "true" : "false");
  doc.set("env", "outer_size", std::to_string(env.outer_size));
  doc.set("env", "goal_enabled", env.goal_enabled ? "true" : "false");
  doc.set("env", "max_steps", std::to_string(env.max_steps));
  doc.set("env", "seed", std::to_string(env.seed));
  doc.set("env", "random_start", env.random_start ? "true" : "false");
  doc.set("env", "done_action_terminates", env.done_action_terminates ? "true" : "false");
  return doc;
}

TrainConfig TrainConfig::from_doc(const KeyValueDoc& doc, TrainConfig base) {
  TrainConfig c = std::move(base);
  std::optional<int> checkpoint_every;
  for (const auto& e : doc.entries()) {
    const std::string name = e.section.empty() ? e.key : e.section + "." + e.key;
    const auto& v = e.value;
    if (e.section == "train") {
      if (e.key == "beta") c.beta = parse_double(v, name);
      else if (e.key == "total_steps" || e.key == "steps") c.total_steps = static_cast<int>(parse_int(v, name));
      else if (e.key == "lr") c.lr = parse_double(v, name);
      else if (e.key == "batch_size") c.batch_size = static_cast<int>(parse_int(v, name));
      else if (e.key == "buffer_capacity") c.buffer_capacity = static_cast<int>(parse_int(v, name));
      else if (e.key == "checkpoint_steps") c.checkpoint_steps = parse_int_list(v, name);
      else if (e.key == "checkpoint_every") checkpoint_every = static_cast<int>(parse_int(v, name));
      else if (e.key == "seed") c.seed = parse_uint(v, name);
      else if (e.key == "log_every") c.log_every = static_cast<int>(parse_int(v, name));
      else if (e.key == "target_gradient") c.target_gradient = parse_bool(v, name);
      else if (e.key == "perturbation" || e.key == "condition") c.perturbation = env::Perturbation::parse(v);
      else throw ParseError("unknown config key: " + name);
    } else if (e.section == "env") {
      if (e.key == "outer_size") c.env.outer_size = static_cast<int>(parse_int(v, name));
      else if (e.key == "goal_enabled") c.env.goal_enabled = parse_bool(v, name);
      else if (e.key == "max_steps") c.env.max_steps = static_cast<int>(parse_int(v, name));
      else if (e.key == "seed") c.env.seed = parse_uint(v, name);
      else if (e.key == "random_start") c.env.random_start = parse_bool(v, name);
      else if (e.key == "done_action_terminates") c.env.done_action_terminates = parse_bool(v, name);
      else throw ParseError("unknown config key: " + name);
    } else {
      throw ParseError("unknown config key: " + name);
    }
  }
  if (checkpoint_every) c.checkpoint_steps = every_n_steps(c.total_steps, *checkpoint_every);
  return c;
}

TrainConfig TrainConfig::from_doc(const KeyValueDoc& doc) { return from_doc(doc, TrainConfig{}); }

std::string TrainConfig::digest() const { return fnv1a_hex(to_doc().serialize()); }

std::vector<int> every_n_steps(int total, int every) {
  if (every < 1) throw std::invalid_argument("checkpoint interval must be >= 1");
  std::vector<int> steps;
  for (int s = every; s <= total; s += every) steps.push_back(s);
  return steps;
}

TrainingAborted::TrainingAborted(int step, const std::string& why)
    : std::runtime_error("training aborted at step " + std::to_string(step) + ": " + why), step_(step) {}

Checkpoint initial_checkpoint(const TrainConfig& config) {
  std::mt19937_64 rng(config.seed);
  Checkpoint ckpt;
  ckpt.params = ModelParams::initialized(rng);
  for (const auto& nt : ckpt.params.tensors()) ckpt.adam.push_back(nn::AdamState::for_param(*nt.tensor, config.lr));
  ckpt.train_config = config;
  ckpt.rng_state = rng_state_of(rng);
  return ckpt;
}

std::vector<Checkpoint> train(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ModelParams params = ModelParams::initialized(rng);
  std::vector<nn::AdamState> adam;
  for (const auto& nt : params.tensors()) adam.push_back(nn::AdamState::for_param(*nt.tensor, config.lr));

  MetricsLog log(hooks.metrics_csv, config.digest());
  ReplayBuffer buffer(static_cast<std::size_t>(config.buffer_capacity));
  env::GridWorld world(config.env);

  auto observe = [&](env::StepResult r) {
    env::perturb(r.obs, config.perturbation, rng);
    return r;
  };

  std::vector<Checkpoint> checkpoints;
  auto next_ckpt = config.checkpoint_steps.begin();
  auto current = observe(world.reset(rng));
  std::vector<env::Transition> batch(static_cast<std::size_t>(config.batch_size));

  for (int step = 1; step <= config.total_steps; ++step) {
    const env::Action action = env::random_action(rng);
    auto next = observe(world.step(action));
    buffer.push({current.obs, action, next.obs, current.state, next.state, next.done});
    current = next.done ? observe(world.reset(rng)) : std::move(next);

    std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
    for (auto& slot : batch) slot = buffer[pick(rng)];

    LossAndGrads result;
    try {
      result = compute_loss(params, batch, config.beta, rng,
                            config.target_gradient ? TargetGradient::Through : TargetGradient::Stop);
      auto p = params.tensors();
      auto g = result.grads.tensors();
      for (std::size_t i = 0; i < p.size(); ++i) nn::adam_step(*p[i].tensor, *g[i].tensor, adam[i]);
    } catch (const NonFiniteLoss& e) {
      throw TrainingAborted(step, e.what());
    } catch (const nn::NonFiniteGradient& e) {
      throw TrainingAborted(step, e.what());
    }

    if (step % config.log_every == 0) log.write(step, result.loss);

    if (next_ckpt != config.checkpoint_steps.end() && *next_ckpt == step) {
      Checkpoint ckpt{step, params, adam, config, rng_state_of(rng)};
      if (hooks.on_checkpoint) hooks.on_checkpoint(ckpt);
      if (hooks.keep_checkpoints) checkpoints.push_back(std::move(ckpt));
      ++next_ckpt;
    }
  }
  return checkpoints;
}

std::vector<env::Transition> collect_transitions(const env::GridConfig& grid, const env::Perturbation& perturbation,
                                                 int n_episodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto transitions = env::rollout_random(grid, n_episodes, rng);
  if (perturbation.kind != env::Perturbation::Kind::None) {
    // Successive transitions share an observation; perturb it once.
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      auto& t = transitions[i];
      const bool continues = i > 0 && !transitions[i - 1].done;
      if (continues) {
        t.obs = transitions[i - 1].next_obs;
      } else {
        env::perturb(t.obs, perturbation, rng);
      }
      env::perturb(t.next_obs, perturbation, rng);
    }
  }
  return transitions;
}

double prediction_loss_eval(const Checkpoint& ckpt, std::span<const env::Transition> heldout) {
  return prediction_loss(ckpt.params, heldout);
}

}  // namespace geoworld::wm
