#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace geoworld::env {

/// Empty square room surrounded by walls. Cells are indexed (x = column, y = row)
/// with (0,0) the top-left wall corner; the navigable interior is [1, outer_size-2]^2.
struct GridConfig {
  int outer_size = 8;
  bool goal_enabled = true;
  int max_steps = 0;  ///< 0 selects the default 4 * outer_size^2.
  std::uint64_t seed = 0;
  bool random_start = false;
  bool done_action_terminates = false;

  static GridConfig empty8() { return {}; }
  static GridConfig empty16() {
    GridConfig c;
    c.outer_size = 16;
    return c;
  }

  /// Throws std::invalid_argument if outer_size < 4 or max_steps < 0.
  void validate() const;
  int effective_max_steps() const { return max_steps > 0 ? max_steps : 4 * outer_size * outer_size; }
  int interior_cells() const { return (outer_size - 2) * (outer_size - 2); }
  std::string name() const;

  bool operator==(const GridConfig&) const = default;
};

enum class Direction : int { East = 0, South = 1, West = 2, North = 3 };

struct AgentState {
  int x = 1;
  int y = 1;
  int dir = 0;

  bool operator==(const AgentState&) const = default;
};

enum class Action : int { TurnLeft = 0, TurnRight = 1, Forward = 2, Toggle = 3, Pickup = 4, Drop = 5, Done = 6 };
inline constexpr int kNumActions = 7;

/// Egocentric 7x7x3 view stored [row][col][channel]. The agent sits at
/// (row 6, col 3) looking towards row 0.
struct Observation {
  static constexpr int kView = 7;
  static constexpr int kChannels = 3;
  static constexpr int kSize = kView * kView * kChannels;

  std::array<double, kSize> values{};

  static constexpr int index(int row, int col, int ch) { return (row * kView + col) * kChannels + ch; }
  double at(int row, int col, int ch) const { return values[index(row, col, ch)]; }
  double& at(int row, int col, int ch) { return values[index(row, col, ch)]; }

  bool operator==(const Observation&) const = default;
};

/// Raw symbolic cell codes before normalisation.
namespace cell {
inline constexpr int kEmpty = 1;
inline constexpr int kWall = 2;
inline constexpr int kGoal = 8;
inline constexpr int kGreen = 1;
inline constexpr int kGrey = 5;
inline constexpr double kObjectScale = 10.0;
inline constexpr double kColorScale = 5.0;
inline constexpr double kStateScale = 2.0;
}  // namespace cell

struct Transition {
  Observation obs;
  Action action = Action::Done;
  Observation next_obs;
  AgentState state;
  AgentState next_state;
  bool done = false;
};

struct Perturbation {
  enum class Kind { None, Gaussian, Mask };
  Kind kind = Kind::None;
  double amount = 0.0;  ///< sigma for Gaussian, drop probability for Mask

  static Perturbation none() { return {}; }
  static Perturbation gaussian(double sigma) { return {Kind::Gaussian, sigma}; }
  static Perturbation mask(double p) { return {Kind::Mask, p}; }

  /// "clean", "noise0.3", "mask0.5" style label; parse() accepts the same.
  std::string label() const;
  static Perturbation parse(const std::string& text);

  bool operator==(const Perturbation&) const = default;
};

/// Gaussian noise is added to every entry without clipping; masking zeroes
/// whole cells (all three channels) independently.
void perturb(Observation& obs, const Perturbation& p, std::mt19937_64& rng);

Direction direction_of(const AgentState& s);
std::array<int, 2> direction_vector(int dir);

bool is_wall(int x, int y, const GridConfig& config);
bool is_goal(int x, int y, const GridConfig& config);

/// Raw (object, colour, state) code of a world cell; outside the grid reads as wall.
std::array<int, 3> encode_cell(int x, int y, const GridConfig& config);

Observation render_observation(const AgentState& state, const GridConfig& config);

/// Pose change caused by one action, ignoring episode bookkeeping.
AgentState apply_action(const AgentState& state, Action action, const GridConfig& config);

struct StepResult {
  AgentState state;
  Observation obs;
  bool done = false;
};

class GridWorld {
 public:
  explicit GridWorld(GridConfig config);

  StepResult reset(std::mt19937_64& rng);
  /// Throws std::logic_error when the episode has already finished.
  StepResult step(Action action);

  const GridConfig& config() const { return config_; }
  const AgentState& state() const { return state_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }

 private:
  GridConfig config_;
  AgentState state_;
  int steps_ = 0;
  bool done_ = true;
};

Action random_action(std::mt19937_64& rng);

/// Uniform-random policy for n_episodes; transitions never span a reset.
std::vector<Transition> rollout_random(const GridConfig& config, int n_episodes, std::mt19937_64& rng);

}  // namespace geoworld::env
