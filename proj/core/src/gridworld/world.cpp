#include "abya/gridworld/world.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace abya::grid {

namespace {

constexpr std::array<std::string_view, kColorCount> kColorNames = {"red",    "green",  "blue",
                                                                   "purple", "yellow", "grey"};
constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "left", "right", "forward", "pickup", "drop", "toggle", "done"};

// Wall sides as used by the room walk: 0 east, 1 south, 2 west, 3 north.
int rand_int(Rng& rng, int low, int high) {
  return std::uniform_int_distribution<int>(low, high - 1)(rng);
}

struct Placement {
  int x = 0;  // column
  int y = 0;  // row
};

class RoomWalk {
 public:
  RoomWalk(int width, int height, Rng& rng) : width_(width), height_(height), rng_(rng) {}

  bool place(int rooms_left, std::vector<Room>& rooms, int min_size, int max_size,
             int entry_wall, Placement entry) {
    const int size_x = rand_int(rng_, min_size, max_size + 1);
    const int size_y = rand_int(rng_, min_size, max_size + 1);
    int top_x = 0;
    int top_y = 0;
    if (rooms.empty()) {
      top_x = entry.x;
      top_y = entry.y;
    } else if (entry_wall == 0) {
      top_x = entry.x - size_x + 1;
      top_y = rand_int(rng_, entry.y - size_y + 2, entry.y);
    } else if (entry_wall == 1) {
      top_x = rand_int(rng_, entry.x - size_x + 2, entry.x);
      top_y = entry.y - size_y + 1;
    } else if (entry_wall == 2) {
      top_x = entry.x;
      top_y = rand_int(rng_, entry.y - size_y + 2, entry.y);
    } else {
      top_x = rand_int(rng_, entry.x - size_x + 2, entry.x);
      top_y = entry.y;
    }
    if (top_x < 0 || top_y < 0) return false;
    if (top_x + size_x > width_ || top_y + size_y >= height_) return false;
    // The previous room shares a wall with this one, so it is not checked.
    for (std::size_t i = 0; i + 1 < rooms.size(); ++i) {
      const Room& r = rooms[i];
      const bool apart = top_x + size_x < r.top_left.col || r.top_left.col + r.cols <= top_x ||
                         top_y + size_y < r.top_left.row || r.top_left.row + r.rows <= top_y;
      if (!apart) return false;
    }
    Room room;
    room.top_left = {top_y, top_x};
    room.rows = size_y;
    room.cols = size_x;
    if (!rooms.empty()) room.entry_door = Position{entry.y, entry.x};
    rooms.push_back(room);
    if (rooms_left == 1) return true;

    for (int attempt = 0; attempt < 8; ++attempt) {
      std::vector<int> walls;
      for (int w = 0; w < 4; ++w)
        if (w != entry_wall) walls.push_back(w);
      const int exit_wall = walls[static_cast<std::size_t>(rand_int(rng_, 0, 3))];
      const int next_entry = (exit_wall + 2) % 4;
      Placement exit;
      if (exit_wall == 0) {
        exit = {top_x + size_x - 1, top_y + rand_int(rng_, 1, size_y - 1)};
      } else if (exit_wall == 1) {
        exit = {top_x + rand_int(rng_, 1, size_x - 1), top_y + size_y - 1};
      } else if (exit_wall == 2) {
        exit = {top_x, top_y + rand_int(rng_, 1, size_y - 1)};
      } else {
        exit = {top_x + rand_int(rng_, 1, size_x - 1), top_y};
      }
      if (place(rooms_left - 1, rooms, min_size, max_size, next_entry, exit)) break;
    }
    return true;
  }

 private:
  int width_;
  int height_;
  Rng& rng_;
};

Position random_free_cell(const WorldState& s, const Room& room, Rng& rng,
                          std::optional<Position> exclude) {
  for (int tries = 0; tries < 10000; ++tries) {
    const Position p{rand_int(rng, room.top_left.row, room.top_left.row + room.rows),
                     rand_int(rng, room.top_left.col, room.top_left.col + room.cols)};
    if (s.at(p).kind != ObjectKind::Empty) continue;
    if (exclude && *exclude == p) continue;
    return p;
  }
  throw std::logic_error("no free cell in room");
}

Position offset(Position p, Heading h, int distance) {
  switch (h) {
    case Heading::North: return {p.row - distance, p.col};
    case Heading::East: return {p.row, p.col + distance};
    case Heading::South: return {p.row + distance, p.col};
    case Heading::West: return {p.row, p.col - distance};
  }
  return p;
}

Heading turn(Heading h, int quarter_turns) {
  return static_cast<Heading>((static_cast<int>(h) + quarter_turns + 4) % 4);
}

bool see_through(const Cell& c) {
  if (c.kind == ObjectKind::Wall) return false;
  if (c.kind == ObjectKind::Door) return c.state == DoorState::Open;
  return true;
}

}  // namespace

std::string_view color_name(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
std::string_view action_name(Action a) { return kActionNames[static_cast<std::size_t>(a)]; }

EnvConfig EnvConfig::from_name(std::string_view name) {
  std::string_view rest = name;
  if (rest.starts_with("MiniGrid-")) rest.remove_prefix(9);
  if (rest.ends_with("-v0")) rest.remove_suffix(3);
  if (!rest.starts_with("MultiRoom-N")) {
    throw std::invalid_argument("unknown environment: " + std::string(name));
  }
  rest.remove_prefix(11);
  EnvConfig cfg;
  auto [p1, e1] = std::from_chars(rest.data(), rest.data() + rest.size(), cfg.rooms);
  if (e1 != std::errc{} || p1 + 2 > rest.data() + rest.size() || p1[0] != '-' || p1[1] != 'S') {
    throw std::invalid_argument("unknown environment: " + std::string(name));
  }
  auto [p2, e2] = std::from_chars(p1 + 2, rest.data() + rest.size(), cfg.room_size);
  if (e2 != std::errc{} || p2 != rest.data() + rest.size()) {
    throw std::invalid_argument("unknown environment: " + std::string(name));
  }
  if (cfg.rooms < 2 || cfg.room_size < 4) {
    throw std::invalid_argument("environment needs >= 2 rooms of size >= 4: " + std::string(name));
  }
  return cfg;
}

std::string EnvConfig::name() const {
  return "MultiRoom-N" + std::to_string(rooms) + "-S" + std::to_string(room_size);
}

Position WorldState::front() const { return offset(agent, heading, 1); }

WorldState generate(const EnvConfig& cfg, Rng& rng) {
  constexpr int kMinRoomSize = 4;
  const int size = cfg.grid_size;
  std::vector<Room> rooms;
  for (int attempt = 0; static_cast<int>(rooms.size()) < cfg.rooms; ++attempt) {
    if (attempt > 100000) throw std::logic_error("room placement did not converge");
    std::vector<Room> candidate;
    RoomWalk walk(size, size, rng);
    const Placement entry{rand_int(rng, 0, size - 2), rand_int(rng, 0, size - 2)};
    walk.place(cfg.rooms, candidate, kMinRoomSize, cfg.room_size, 2, entry);
    if (candidate.size() > rooms.size()) rooms = std::move(candidate);
  }

  WorldState s;
  s.width = size;
  s.height = size;
  s.cells.assign(static_cast<std::size_t>(size * size), Cell{});
  s.max_steps = cfg.max_steps();
  const Cell wall{ObjectKind::Wall, Color::Grey, DoorState::None};
  std::optional<Color> previous_door;
  for (std::size_t idx = 0; idx < rooms.size(); ++idx) {
    Room& room = rooms[idx];
    const int r0 = room.top_left.row, c0 = room.top_left.col;
    for (int i = 0; i < room.cols; ++i) {
      s.at({r0, c0 + i}) = wall;
      s.at({r0 + room.rows - 1, c0 + i}) = wall;
    }
    for (int j = 0; j < room.rows; ++j) {
      s.at({r0 + j, c0}) = wall;
      s.at({r0 + j, c0 + room.cols - 1}) = wall;
    }
    if (idx > 0) {
      std::vector<Color> choices;
      for (int c = 0; c < kColorCount; ++c) {
        if (!previous_door || static_cast<int>(*previous_door) != c) {
          choices.push_back(static_cast<Color>(c));
        }
      }
      const Color door_color =
          choices[static_cast<std::size_t>(rand_int(rng, 0, static_cast<int>(choices.size())))];
      s.at(*room.entry_door) = Cell{ObjectKind::Door, door_color, DoorState::Closed};
      previous_door = door_color;
      rooms[idx - 1].exit_door = room.entry_door;
    }
  }
  s.rooms = std::move(rooms);

  s.agent = random_free_cell(s, s.rooms.front(), rng, std::nullopt);
  s.heading = static_cast<Heading>(rand_int(rng, 0, 4));
  const Position goal = random_free_cell(s, s.rooms.back(), rng, s.agent);
  s.at(goal) = Cell{ObjectKind::Goal, Color::Green, DoorState::None};
  return s;
}

double goal_reward(int steps, int max_steps) {
  return 1.0 - 0.9 * static_cast<double>(steps) / static_cast<double>(max_steps);
}

StepResult step(const WorldState& state, Action action) {
  if (state.terminated) throw std::logic_error("step called on a terminated episode");
  StepResult out{state, 0.0, false, false};
  WorldState& s = out.state;
  s.steps += 1;
  const Position ahead = s.front();
  switch (action) {
    case Action::TurnLeft: s.heading = turn(s.heading, -1); break;
    case Action::TurnRight: s.heading = turn(s.heading, 1); break;
    case Action::Forward:
      if (s.in_bounds(ahead)) {
        const Cell& c = s.at(ahead);
        const bool passable = c.kind == ObjectKind::Empty || c.kind == ObjectKind::Goal ||
                              (c.kind == ObjectKind::Door && c.state == DoorState::Open);
        if (passable) s.agent = ahead;
        if (c.kind == ObjectKind::Goal) {
          out.terminated = true;
          out.reached_goal = true;
          out.reward = goal_reward(s.steps, s.max_steps);
        }
      }
      break;
    case Action::Toggle:
      if (s.in_bounds(ahead) && s.at(ahead).kind == ObjectKind::Door) {
        Cell& door = s.at(ahead);
        door.state = door.state == DoorState::Open ? DoorState::Closed : DoorState::Open;
      }
      break;
    case Action::Pickup:
    case Action::Drop:
    case Action::Done: break;
  }
  if (s.steps >= s.max_steps) out.terminated = true;
  s.terminated = out.terminated;
  return out;
}

std::uint8_t kind_code(ObjectKind k) { return static_cast<std::uint8_t>(static_cast<int>(k) + 1); }

std::uint8_t color_code(const Cell& c) {
  if (c.kind == ObjectKind::Empty) return 0;
  return static_cast<std::uint8_t>(static_cast<int>(c.color) + 1);
}

std::uint8_t state_code(DoorState s) { return static_cast<std::uint8_t>(s); }

Position view_to_world(const WorldState& state, int view_row, int view_col) {
  const int forward = kViewSize - 1 - view_row;
  const int lateral = view_col - kViewSize / 2;
  Position p = offset(state.agent, state.heading, forward);
  return offset(p, turn(state.heading, 1), lateral);
}

Observation observe(const WorldState& state) {
  const Cell out_of_grid{ObjectKind::Wall, Color::Grey, DoorState::None};
  std::array<Cell, kViewSize * kViewSize> view{};
  auto at = [&](int col, int row) -> Cell& { return view[static_cast<std::size_t>(row * kViewSize + col)]; };
  for (int r = 0; r < kViewSize; ++r)
    for (int c = 0; c < kViewSize; ++c) {
      const Position p = view_to_world(state, r, c);
      at(c, r) = state.in_bounds(p) ? state.at(p) : out_of_grid;
    }

  // Visibility sweep from the agent cell toward the far edge of the view.
  std::array<bool, kViewSize * kViewSize> mask{};
  auto seen = [&](int col, int row) -> bool& { return mask[static_cast<std::size_t>(row * kViewSize + col)]; };
  seen(kViewSize / 2, kViewSize - 1) = true;
  for (int j = kViewSize - 1; j >= 0; --j) {
    for (int i = 0; i < kViewSize - 1; ++i) {
      if (!seen(i, j) || !see_through(at(i, j))) continue;
      seen(i + 1, j) = true;
      if (j > 0) {
        seen(i + 1, j - 1) = true;
        seen(i, j - 1) = true;
      }
    }
    for (int i = kViewSize - 1; i >= 1; --i) {
      if (!seen(i, j) || !see_through(at(i, j))) continue;
      seen(i - 1, j) = true;
      if (j > 0) {
        seen(i - 1, j - 1) = true;
        seen(i, j - 1) = true;
      }
    }
  }

  Observation obs;
  for (int r = 0; r < kViewSize; ++r)
    for (int c = 0; c < kViewSize; ++c) {
      if (!seen(c, r)) continue;
      const Cell& cell = at(c, r);
      obs.code(r, c, 0) = kind_code(cell.kind);
      obs.code(r, c, 1) = color_code(cell);
      obs.code(r, c, 2) = state_code(cell.state);
    }
  return obs;
}

std::string render_ascii(const WorldState& state) {
  std::string out;
  out.reserve(static_cast<std::size_t>((state.width + 1) * state.height));
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      const Position p{r, c};
      if (p == state.agent) {
        out.push_back("^>v<"[static_cast<int>(state.heading)]);
        continue;
      }
      const Cell& cell = state.at(p);
      switch (cell.kind) {
        case ObjectKind::Empty: out.push_back('.'); break;
        case ObjectKind::Wall: out.push_back('#'); break;
        case ObjectKind::Goal: out.push_back('*'); break;
        case ObjectKind::Door: {
          const char letter = "RGBPYE"[static_cast<int>(cell.color)];
          out.push_back(cell.state == DoorState::Open
                            ? static_cast<char>(letter - 'A' + 'a')
                            : letter);
          break;
        }
      }
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace abya::grid
