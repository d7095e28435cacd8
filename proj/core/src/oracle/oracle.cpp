#include "abya/oracle/oracle.hpp"

#include <sstream>
#include <stdexcept>

namespace abya::oracle {

namespace {

constexpr std::array<std::string_view, vocab::kSize> kWords = {
    "<sos>", "<eos>", "red",   "green", "blue",  "purple", "yellow", "grey",  "door",
    "goal",  "wall",  "is",    "north", "south", "east",   "west",   "open",  "closed"};

constexpr std::array<grid::ObjectKind, 3> kObjects = {grid::ObjectKind::Door, grid::ObjectKind::Goal,
                                                      grid::ObjectKind::Wall};

bool in_range(TokenId t, TokenId first, int count) { return t >= first && t < first + count; }

}  // namespace

std::string_view vocab::word(TokenId id) {
  if (id >= kSize) throw std::out_of_range("token id " + std::to_string(id));
  return kWords[id];
}

std::optional<TokenId> vocab::lookup(std::string_view w) {
  for (std::size_t i = 0; i < kWords.size(); ++i)
    if (kWords[i] == w) return static_cast<TokenId>(i);
  return std::nullopt;
}

ParseResult parse(std::span<const TokenId> tokens) {
  if (tokens.size() != 4) {
    return SyntaxError{"expected 4 tokens, got " + std::to_string(tokens.size())};
  }
  if (!in_range(tokens[0], vocab::kFirstColor, grid::kColorCount)) {
    return SyntaxError{"position 1 must be a color"};
  }
  if (!in_range(tokens[1], vocab::kFirstObject, 3)) return SyntaxError{"position 2 must be an object"};
  if (tokens[2] != vocab::kIs) return SyntaxError{"position 3 must be 'is'"};
  Predicate p{static_cast<grid::Color>(tokens[0] - vocab::kFirstColor),
              kObjects[tokens[1] - vocab::kFirstObject], Direction::North};
  if (in_range(tokens[3], vocab::kFirstDirection, 4)) {
    p.attribute = static_cast<Direction>(tokens[3] - vocab::kFirstDirection);
  } else if (tokens[3] == vocab::kFirstState) {
    p.attribute = grid::DoorState::Open;
  } else if (tokens[3] == vocab::kFirstState + 1) {
    p.attribute = grid::DoorState::Closed;
  } else {
    return SyntaxError{"position 4 must be a direction or a state"};
  }
  return p;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::True: return "True";
    case Verdict::False: return "False";
    case Verdict::Undefined: return "Undefined";
    case Verdict::SyntaxError: return "SyntaxError";
  }
  return "?";
}

Verdict evaluate(const Predicate& p, const grid::WorldState& s) {
  std::optional<grid::Position> match;
  int count = 0;
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c) {
      const grid::Cell& cell = s.at({r, c});
      if (cell.kind == p.object && cell.color == p.color) {
        ++count;
        match = grid::Position{r, c};
      }
    }
  if (count != 1) return Verdict::Undefined;
  const grid::Cell& target = s.at(*match);

  if (const auto* state = std::get_if<grid::DoorState>(&p.attribute)) {
    if (target.kind != grid::ObjectKind::Door) return Verdict::Undefined;
    return target.state == *state ? Verdict::True : Verdict::False;
  }
  bool holds = false;
  switch (std::get<Direction>(p.attribute)) {
    case Direction::North: holds = match->row < s.agent.row; break;
    case Direction::South: holds = match->row > s.agent.row; break;
    case Direction::East: holds = match->col > s.agent.col; break;
    case Direction::West: holds = match->col < s.agent.col; break;
  }
  return holds ? Verdict::True : Verdict::False;
}

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Train: return "train";
    case Mode::Test: return "test";
    case Mode::Random: return "random";
  }
  return "?";
}

Mode mode_from_name(std::string_view name) {
  if (name == "train") return Mode::Train;
  if (name == "test") return Mode::Test;
  if (name == "random") return Mode::Random;
  throw std::invalid_argument("unknown oracle mode: " + std::string(name));
}

std::array<int, 2> eta_for(Verdict v) {
  switch (v) {
    case Verdict::True: return {1, 1};
    case Verdict::False: return {0, 0};
    case Verdict::Undefined: return {0, 1};
    case Verdict::SyntaxError: return {1, 0};
  }
  return {1, 0};
}

AnswerCode answer(std::span<const TokenId> tokens, const grid::WorldState& s, Mode mode, Rng& rng) {
  constexpr double kQuestionReward = 0.2;
  const ParseResult parsed = parse(tokens);
  const auto* predicate = std::get_if<Predicate>(&parsed);
  AnswerCode out;
  if (predicate == nullptr) {
    out.verdict = Verdict::SyntaxError;
    out.reward = -kQuestionReward;
  } else {
    out.verdict = evaluate(*predicate, s);
    if (mode == Mode::Train) {
      out.reward = out.verdict == Verdict::Undefined ? 0.0 : kQuestionReward;
    }
    if (mode == Mode::Random) {
      out.verdict = std::bernoulli_distribution(0.5)(rng) ? Verdict::True : Verdict::False;
    }
  }
  out.eta = eta_for(out.verdict);
  return out;
}

std::vector<Tokens> enumerate_grammar() {
  std::vector<Tokens> out;
  for (int c = 0; c < grid::kColorCount; ++c)
    for (int o = 0; o < 3; ++o)
      for (int a = 0; a < 6; ++a) {
        const auto attribute = static_cast<TokenId>(a < 4 ? vocab::kFirstDirection + a
                                                          : vocab::kFirstState + (a - 4));
        out.push_back({vocab::kSos, static_cast<TokenId>(vocab::kFirstColor + c),
                       static_cast<TokenId>(vocab::kFirstObject + o), vocab::kIs, attribute,
                       vocab::kEos});
      }
  return out;
}

std::string to_text(std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId t : tokens) {
    if (t == vocab::kSos || t == vocab::kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab::word(t);
  }
  return out;
}

std::optional<Tokens> from_text(std::string_view text) {
  Tokens out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    auto id = vocab::lookup(w);
    if (!id) return std::nullopt;
    out.push_back(*id);
  }
  return out;
}

}  // namespace abya::oracle
