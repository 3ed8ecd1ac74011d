#include "geoworld/gridworld.hpp"

#include <charconv>
#include <stdexcept>

namespace geoworld::env {
namespace {

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_amount(const std::string& text, std::size_t offset) {
  double v = 0.0;
  const char* first = text.data() + offset;
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument("bad perturbation amount: " + text);
  return v;
}

}  // namespace

void GridConfig::validate() const {
  if (outer_size < 4) throw std::invalid_argument("outer_size must be >= 4");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 1 (or 0 for the default)");
}

std::string GridConfig::name() const { return "empty" + std::to_string(outer_size); }

std::string Perturbation::label() const {
  switch (kind) {
    case Kind::None: return "clean";
    case Kind::Gaussian: return "noise" + shortest(amount);
    case Kind::Mask: return "mask" + shortest(amount);
  }
  return "clean";
}

Perturbation Perturbation::parse(const std::string& text) {
  if (text == "clean" || text == "none" || text.empty()) return none();
  if (text.rfind("noise", 0) == 0) return gaussian(parse_amount(text, 5));
  if (text.rfind("mask", 0) == 0) {
    const double p = parse_amount(text, 4);
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("mask probability out of [0,1]: " + text);
    return mask(p);
  }
  throw std::invalid_argument("unknown condition: " + text);
}

void perturb(Observation& obs, const Perturbation& p, std::mt19937_64& rng) {
  switch (p.kind) {
    case Perturbation::Kind::None: return;
    case Perturbation::Kind::Gaussian: {
      std::normal_distribution<double> noise(0.0, p.amount);
      for (auto& v : obs.values) v += noise(rng);
      return;
    }
    case Perturbation::Kind::Mask: {
      std::bernoulli_distribution drop(p.amount);
      for (int r = 0; r < Observation::kView; ++r) {
        for (int c = 0; c < Observation::kView; ++c) {
          if (drop(rng)) {
            for (int ch = 0; ch < Observation::kChannels; ++ch) obs.at(r, c, ch) = 0.0;
          }
        }
      }
      return;
    }
  }
}

Direction direction_of(const AgentState& s) { return static_cast<Direction>(s.dir); }

std::array<int, 2> direction_vector(int dir) {
  switch (dir & 3) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
  }
}

bool is_wall(int x, int y, const GridConfig& config) {
  return x <= 0 || y <= 0 || x >= config.outer_size - 1 || y >= config.outer_size - 1;
}

bool is_goal(int x, int y, const GridConfig& config) {
  return config.goal_enabled && x == config.outer_size - 2 && y == config.outer_size - 2;
}

std::array<int, 3> encode_cell(int x, int y, const GridConfig& config) {
  if (is_wall(x, y, config)) return {cell::kWall, cell::kGrey, 0};
  if (is_goal(x, y, config)) return {cell::kGoal, cell::kGreen, 0};
  return {cell::kEmpty, 0, 0};
}

Observation render_observation(const AgentState& state, const GridConfig& config) {
  const auto fwd = direction_vector(state.dir);
  const auto right = direction_vector(state.dir + 1);
  Observation obs;
  for (int row = 0; row < Observation::kView; ++row) {
    const int ahead = Observation::kView - 1 - row;
    for (int col = 0; col < Observation::kView; ++col) {
      const int lateral = col - Observation::kView / 2;
      const int x = state.x + ahead * fwd[0] + lateral * right[0];
      const int y = state.y + ahead * fwd[1] + lateral * right[1];
      const auto code = encode_cell(x, y, config);
      obs.at(row, col, 0) = code[0] / cell::kObjectScale;
      obs.at(row, col, 1) = code[1] / cell::kColorScale;
      obs.at(row, col, 2) = code[2] / cell::kStateScale;
    }
  }
  return obs;
}

AgentState apply_action(const AgentState& state, Action action, const GridConfig& config) {
  AgentState next = state;
  switch (action) {
    case Action::TurnLeft: next.dir = (state.dir + 3) % 4; break;
    case Action::TurnRight: next.dir = (state.dir + 1) % 4; break;
    case Action::Forward: {
      const auto d = direction_vector(state.dir);
      const int nx = state.x + d[0];
      const int ny = state.y + d[1];
      if (!is_wall(nx, ny, config)) {
        next.x = nx;
        next.y = ny;
      }
      break;
    }
    default: break;
  }
  return next;
}

GridWorld::GridWorld(GridConfig config) : config_(config) { config_.validate(); }

StepResult GridWorld::reset(std::mt19937_64& rng) {
  state_ = AgentState{1, 1, 0};
  if (config_.random_start) {
    std::uniform_int_distribution<int> coord(1, config_.outer_size - 2);
    std::uniform_int_distribution<int> dir(0, 3);
    do {
      state_.x = coord(rng);
      state_.y = coord(rng);
    } while (is_goal(state_.x, state_.y, config_));
    state_.dir = dir(rng);
  }
  steps_ = 0;
  done_ = false;
  return {state_, render_observation(state_, config_), false};
}

StepResult GridWorld::step(Action action) {
  if (done_) throw std::logic_error("GridWorld::step called on a finished episode");
  state_ = apply_action(state_, action, config_);
  ++steps_;
  done_ = steps_ >= config_.effective_max_steps() || is_goal(state_.x, state_.y, config_) ||
          (action == Action::Done && config_.done_action_terminates);
  return {state_, render_observation(state_, config_), done_};
}

Action random_action(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(0, kNumActions - 1);
  return static_cast<Action>(dist(rng));
}

std::vector<Transition> rollout_random(const GridConfig& config, int n_episodes, std::mt19937_64& rng) {
  if (n_episodes < 1) throw std::invalid_argument("rollout_random: n_episodes must be >= 1");
  GridWorld world(config);
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(n_episodes) * static_cast<std::size_t>(config.effective_max_steps()));
  for (int ep = 0; ep < n_episodes; ++ep) {
    auto current = world.reset(rng);
    while (!world.done()) {
      const Action a = random_action(rng);
      auto next = world.step(a);
      out.push_back({current.obs, a, next.obs, current.state, next.state, next.done});
      current = std::move(next);
    }
  }
  return out;
}

}  // namespace geoworld::env
