#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abya/autodiff/sampling.hpp"

namespace abya::grid {

enum class ObjectKind : std::uint8_t { Empty, Wall, Door, Goal };
enum class Color : std::uint8_t { Red, Green, Blue, Purple, Yellow, Grey };
enum class DoorState : std::uint8_t { None, Open, Closed };
enum class Heading : std::uint8_t { North, East, South, West };
enum class Action : std::uint8_t { TurnLeft, TurnRight, Forward, Pickup, Drop, Toggle, Done };

inline constexpr int kColorCount = 6;
inline constexpr int kActionCount = 7;

std::string_view color_name(Color c);
std::string_view action_name(Action a);

struct Position {
  int row = 0;
  int col = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

struct Cell {
  ObjectKind kind = ObjectKind::Empty;
  Color color = Color::Grey;
  DoorState state = DoorState::None;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Axis-aligned room including its wall ring.
struct Room {
  Position top_left;
  int rows = 0;
  int cols = 0;
  std::optional<Position> entry_door;
  std::optional<Position> exit_door;
  friend bool operator==(const Room&, const Room&) = default;

  bool contains(Position p) const {
    return p.row >= top_left.row && p.row < top_left.row + rows && p.col >= top_left.col &&
           p.col < top_left.col + cols;
  }
  bool interior(Position p) const {
    return p.row > top_left.row && p.row < top_left.row + rows - 1 && p.col > top_left.col &&
           p.col < top_left.col + cols - 1;
  }
};

struct EnvConfig {
  int rooms = 2;
  int room_size = 4;  // maximum room side, walls included
  int grid_size = 25;

  int max_steps() const { return 20 * room_size; }

  /// Accepts "MultiRoom-N<rooms>-S<size>" (an optional "MiniGrid-" prefix and
  /// "-v0" suffix are tolerated).
  static EnvConfig from_name(std::string_view name);
  std::string name() const;
};

struct WorldState {
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;  // row-major
  Position agent;
  Heading heading = Heading::East;
  int steps = 0;
  int max_steps = 0;
  std::vector<Room> rooms;
  bool terminated = false;

  bool in_bounds(Position p) const {
    return p.row >= 0 && p.col >= 0 && p.row < height && p.col < width;
  }
  const Cell& at(Position p) const { return cells[static_cast<std::size_t>(p.row * width + p.col)]; }
  Cell& at(Position p) { return cells[static_cast<std::size_t>(p.row * width + p.col)]; }
  Position front() const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Procedurally places `cfg.rooms` rooms as a chain joined by closed doors,
/// a green goal in the last room and the agent in the first.
WorldState generate(const EnvConfig& cfg, Rng& rng);

struct StepResult {
  WorldState state;
  double reward = 0.0;
  bool terminated = false;
  bool reached_goal = false;
};

/// Applies one action. Throws std::logic_error on a terminated state.
StepResult step(const WorldState& state, Action action);

/// Episode reward for reaching the goal after `steps` actions.
double goal_reward(int steps, int max_steps);

inline constexpr int kViewSize = 7;
inline constexpr int kViewChannels = 3;

// Observation codes. Unseen cells are all-zero.
inline constexpr std::uint8_t kKindUnseen = 0;
inline constexpr int kKindCodes = 5;   // unseen, empty, wall, door, goal
inline constexpr int kColorCodes = 7;  // none, six colors
inline constexpr int kStateCodes = 3;  // none, open, closed

/// Egocentric 7x7 view: agent at row 6, column 3, facing row 0.
struct Observation {
  std::array<std::uint8_t, kViewSize * kViewSize * kViewChannels> codes{};

  std::uint8_t code(int row, int col, int channel) const {
    return codes[static_cast<std::size_t>((row * kViewSize + col) * kViewChannels + channel)];
  }
  std::uint8_t& code(int row, int col, int channel) {
    return codes[static_cast<std::size_t>((row * kViewSize + col) * kViewChannels + channel)];
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

std::uint8_t kind_code(ObjectKind k);
std::uint8_t color_code(const Cell& c);
std::uint8_t state_code(DoorState s);

/// World cell seen at a view coordinate (may lie outside the grid).
Position view_to_world(const WorldState& state, int view_row, int view_col);

Observation observe(const WorldState& state);

/// One character per cell; the agent is drawn as ^ > v <.
std::string render_ascii(const WorldState& state);

}  // namespace abya::grid
