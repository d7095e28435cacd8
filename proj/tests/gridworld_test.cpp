#include <gtest/gtest.h>

#include <deque>

#include "abya/gridworld/world.hpp"

using namespace abya;
using namespace abya::grid;

namespace {

int count_kind(const WorldState& s, ObjectKind k) {
  int n = 0;
  for (const auto& c : s.cells) n += c.kind == k;
  return n;
}

Position find_goal(const WorldState& s) {
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c)
      if (s.at({r, c}).kind == ObjectKind::Goal) return {r, c};
  throw std::logic_error("no goal");
}

// Breadth-first search treating every door as open.
bool reachable(const WorldState& s, Position from, Position to) {
  std::vector<bool> seen(s.cells.size(), false);
  std::deque<Position> queue{from};
  seen[static_cast<std::size_t>(from.row * s.width + from.col)] = true;
  while (!queue.empty()) {
    const Position p = queue.front();
    queue.pop_front();
    if (p == to) return true;
    for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
      const Position q{p.row + dr, p.col + dc};
      if (!s.in_bounds(q) || s.at(q).kind == ObjectKind::Wall) continue;
      auto idx = static_cast<std::size_t>(q.row * s.width + q.col);
      if (seen[idx]) continue;
      seen[idx] = true;
      queue.push_back(q);
    }
  }
  return false;
}

// A single room of empty cells enclosed by walls, agent inside.
WorldState box(int rows, int cols, Position agent, Heading h, int max_steps = 80) {
  WorldState s;
  s.width = cols;
  s.height = rows;
  s.cells.assign(static_cast<std::size_t>(rows * cols), Cell{});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (r == 0 || c == 0 || r == rows - 1 || c == cols - 1) s.at({r, c}) = Cell{ObjectKind::Wall};
  s.agent = agent;
  s.heading = h;
  s.max_steps = max_steps;
  return s;
}

}  // namespace

TEST(Generate, TwoRoomsHaveOneDoorAndOneGreenGoal) {
  const EnvConfig cfg = EnvConfig::from_name("MultiRoom-N2-S4");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto s = generate(cfg, rng);
    EXPECT_EQ(count_kind(s, ObjectKind::Door), 1);
    ASSERT_EQ(count_kind(s, ObjectKind::Goal), 1);
    EXPECT_EQ(s.at(find_goal(s)).color, Color::Green);
    EXPECT_EQ(s.rooms.size(), 2u);
    EXPECT_EQ(s.max_steps, 80);
  }
}

TEST(Generate, FourRoomsPutTheGoalInTheLastRoom) {
  const EnvConfig cfg = EnvConfig::from_name("MultiRoom-N4-S5");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto s = generate(cfg, rng);
    EXPECT_EQ(count_kind(s, ObjectKind::Door), 3);
    ASSERT_EQ(s.rooms.size(), 4u);
    EXPECT_TRUE(s.rooms.back().interior(find_goal(s)));
    EXPECT_TRUE(s.rooms.front().interior(s.agent));
    for (const auto& room : s.rooms) {
      EXPECT_GE(room.rows, 4);
      EXPECT_LE(room.rows, 5);
      EXPECT_GE(room.cols, 4);
      EXPECT_LE(room.cols, 5);
    }
  }
}

TEST(Generate, DoorsAreClosedAndNeighboursDiffer) {
  const EnvConfig cfg = EnvConfig::from_name("MultiRoom-N4-S5");
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto s = generate(cfg, rng);
    for (std::size_t i = 1; i < s.rooms.size(); ++i) {
      const Position d = *s.rooms[i].entry_door;
      EXPECT_EQ(s.at(d).state, DoorState::Closed);
      EXPECT_EQ(s.rooms[i - 1].exit_door, d);
      if (i > 1) EXPECT_NE(s.at(d).color, s.at(*s.rooms[i - 1].entry_door).color);
    }
  }
}

TEST(Generate, SameSeedGivesSameWorld) {
  const EnvConfig cfg = EnvConfig::from_name("MultiRoom-N4-S5");
  Rng a(42), b(42), c(43);
  const auto sa = generate(cfg, a);
  EXPECT_EQ(sa, generate(cfg, b));
  EXPECT_NE(sa, generate(cfg, c));
}

TEST(Generate, GoalIsReachableWithDoorsOpen) {
  for (const char* name : {"MultiRoom-N2-S4", "MultiRoom-N4-S5"}) {
    const EnvConfig cfg = EnvConfig::from_name(name);
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      Rng rng(seed);
      const auto s = generate(cfg, rng);
      EXPECT_TRUE(reachable(s, s.agent, find_goal(s))) << name << " seed " << seed << "\n" << render_ascii(s);
    }
  }
}

TEST(EnvConfig, ParsesNamesAndRejectsOthers) {
  const auto cfg = EnvConfig::from_name("MiniGrid-MultiRoom-N4-S5-v0");
  EXPECT_EQ(cfg.rooms, 4);
  EXPECT_EQ(cfg.room_size, 5);
  EXPECT_EQ(cfg.max_steps(), 100);
  EXPECT_EQ(cfg.name(), "MultiRoom-N4-S5");
  for (const char* bad : {"", "MultiRoom", "MultiRoom-N2", "MultiRoom-N2-S", "MultiRoom-N1-S4", "MultiRoom-N2-S3",
                          "MultiRoom-N2-S4x", "KeyCorridor-N2-S4"}) {
    EXPECT_THROW(EnvConfig::from_name(bad), std::invalid_argument) << bad;
  }
}

TEST(Step, GoalAtStepFortyPaysFiftyFivePercent) {
  auto s = box(5, 5, {2, 1}, Heading::East);
  s.at({2, 2}) = Cell{ObjectKind::Goal, Color::Green};
  s.steps = 39;
  const auto out = step(s, Action::Forward);
  EXPECT_TRUE(out.terminated);
  EXPECT_TRUE(out.reached_goal);
  EXPECT_EQ(out.state.steps, 40);
  EXPECT_NEAR(out.reward, 0.55, 1e-12);
  EXPECT_EQ(out.state.agent, (Position{2, 2}));
}

TEST(Step, TruncationEndsWithZeroReward) {
  auto s = box(5, 5, {2, 2}, Heading::North);
  StepResult out{s};
  for (int t = 0; t < 80; ++t) {
    ASSERT_FALSE(out.terminated);
    out = step(out.state, Action::TurnLeft);
    EXPECT_EQ(out.reward, 0.0);
  }
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.state.steps, 80);
  EXPECT_THROW(step(out.state, Action::TurnLeft), std::logic_error);
}

TEST(Step, GoalRewardStaysWithinBounds) {
  for (int max = 1; max <= 120; ++max)
    for (int t = 1; t <= max; ++t) {
      const double r = goal_reward(t, max);
      EXPECT_GE(r, 0.1 - 1e-12);
      EXPECT_LE(r, 1.0);
    }
  EXPECT_NEAR(goal_reward(80, 80), 0.1, 1e-12);
}

TEST(Step, ToggleOpensTheFacedDoorWithoutMoving) {
  auto s = box(5, 6, {2, 1}, Heading::East);
  s.at({2, 2}) = Cell{ObjectKind::Door, Color::Red, DoorState::Closed};
  auto blocked = step(s, Action::Forward);
  EXPECT_EQ(blocked.state.agent, s.agent);
  auto opened = step(s, Action::Toggle);
  EXPECT_EQ(opened.state.at({2, 2}).state, DoorState::Open);
  EXPECT_EQ(opened.state.agent, s.agent);
  EXPECT_EQ(opened.reward, 0.0);
  auto through = step(opened.state, Action::Forward);
  EXPECT_EQ(through.state.agent, (Position{2, 2}));
  auto closed = step(opened.state, Action::Toggle);
  EXPECT_EQ(closed.state.at({2, 2}).state, DoorState::Closed);
}

TEST(Step, WallsBlockAndTurnsRotate) {
  auto s = box(4, 4, {1, 1}, Heading::North);
  EXPECT_EQ(step(s, Action::Forward).state.agent, s.agent);
  EXPECT_EQ(step(s, Action::TurnRight).state.heading, Heading::East);
  EXPECT_EQ(step(s, Action::TurnLeft).state.heading, Heading::West);
  for (Action a : {Action::Pickup, Action::Drop, Action::Done}) {
    const auto out = step(s, a);
    EXPECT_EQ(out.state.agent, s.agent);
    EXPECT_EQ(out.state.heading, s.heading);
    EXPECT_EQ(out.state.steps, 1);
  }
}

TEST(Observe, WallAheadAppearsInFrontOfTheAgent) {
  auto s = box(6, 6, {1, 2}, Heading::North);
  const auto obs = observe(s);
  EXPECT_EQ(obs.code(5, 3, 0), kind_code(ObjectKind::Wall));
  EXPECT_EQ(obs.code(6, 3, 0), kind_code(ObjectKind::Empty));
  // Past the wall nothing is visible.
  EXPECT_EQ(obs.code(4, 3, 0), kKindUnseen);
}

TEST(Observe, FarGoalIsAbsent) {
  auto s = box(3, 20, {1, 1}, Heading::East);
  s.at({1, 15}) = Cell{ObjectKind::Goal, Color::Green};
  const auto obs = observe(s);
  for (int r = 0; r < kViewSize; ++r)
    for (int c = 0; c < kViewSize; ++c) EXPECT_NE(obs.code(r, c, 0), kind_code(ObjectKind::Goal));
  s.agent = {1, 10};
  const auto near = observe(s);
  EXPECT_EQ(near.code(1, 3, 0), kind_code(ObjectKind::Goal));
  EXPECT_EQ(near.code(1, 3, 1), color_code(s.at({1, 15})));
}

TEST(Observe, OutsideTheGridReadsAsWall) {
  auto s = box(3, 3, {1, 1}, Heading::West);
  s.cells.assign(9, Cell{});
  const auto obs = observe(s);
  // Two cells ahead lies beyond column 0.
  EXPECT_EQ(obs.code(4, 3, 0), kind_code(ObjectKind::Wall));
  EXPECT_EQ(obs.code(4, 3, 1), color_code(Cell{ObjectKind::Wall, Color::Grey}));
}

TEST(Observe, ClosedDoorHidesWhatLiesBehind) {
  auto s = box(3, 8, {1, 1}, Heading::East);
  s.at({1, 3}) = Cell{ObjectKind::Door, Color::Blue, DoorState::Closed};
  s.at({1, 5}) = Cell{ObjectKind::Goal, Color::Green};
  auto obs = observe(s);
  EXPECT_EQ(obs.code(4, 3, 0), kind_code(ObjectKind::Door));
  EXPECT_EQ(obs.code(4, 3, 2), state_code(DoorState::Closed));
  EXPECT_EQ(obs.code(2, 3, 0), kKindUnseen);
  s.at({1, 3}).state = DoorState::Open;
  obs = observe(s);
  EXPECT_EQ(obs.code(2, 3, 0), kind_code(ObjectKind::Goal));
}

TEST(Observe, NeverRevealsCellsBehindWalls) {
  // Doors start closed, so nothing past the first room's wall ring is visible.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    auto s = generate(EnvConfig::from_name("MultiRoom-N4-S5"), rng);
    const Room& first = s.rooms.front();
    const auto obs = observe(s);
    for (int r = 0; r < kViewSize; ++r)
      for (int c = 0; c < kViewSize; ++c) {
        if (obs.code(r, c, 0) == kKindUnseen) continue;
        EXPECT_TRUE(first.contains(view_to_world(s, r, c))) << "seed " << seed << " view " << r << "," << c;
      }
  }
}

TEST(Observe, IsDeterministic) {
  Rng rng(5);
  const auto s = generate(EnvConfig::from_name("MultiRoom-N2-S4"), rng);
  EXPECT_EQ(observe(s), observe(s));
}

TEST(Render, DrawsOneCharacterPerCell) {
  auto s = box(3, 4, {1, 1}, Heading::South);
  s.at({1, 2}) = Cell{ObjectKind::Door, Color::Red, DoorState::Open};
  EXPECT_EQ(render_ascii(s), "####\n#vr#\n####\n");
}
