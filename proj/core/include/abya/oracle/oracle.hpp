#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "abya/autodiff/sampling.hpp"
#include "abya/gridworld/world.hpp"

namespace abya::oracle {

using TokenId = std::uint8_t;
using Tokens = std::vector<TokenId>;

/// Fixed token table shared by the question policy, the Oracle and checkpoints.
namespace vocab {
inline constexpr TokenId kSos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kFirstColor = 2;   // red green blue purple yellow grey
inline constexpr TokenId kFirstObject = 8;  // door goal wall
inline constexpr TokenId kIs = 11;
inline constexpr TokenId kFirstDirection = 12;  // north south east west
inline constexpr TokenId kFirstState = 16;      // open closed
inline constexpr std::size_t kSize = 18;

std::string_view word(TokenId id);
std::optional<TokenId> lookup(std::string_view word);
}  // namespace vocab

enum class Direction : std::uint8_t { North, South, East, West };

struct Predicate {
  grid::Color color;
  grid::ObjectKind object;
  std::variant<Direction, grid::DoorState> attribute;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct SyntaxError {
  std::string reason;
};

using ParseResult = std::variant<Predicate, SyntaxError>;

/// sentence ::= color object "is" (direction | state). Tokens exclude the
/// <sos>/<eos> markers.
ParseResult parse(std::span<const TokenId> tokens);

enum class Verdict : std::uint8_t { True, False, Undefined, SyntaxError };

std::string_view verdict_name(Verdict v);

/// Truth value of a well-formed predicate against the full world state.
Verdict evaluate(const Predicate& p, const grid::WorldState& s);

enum class Mode : std::uint8_t { Train, Test, Random };

std::string_view mode_name(Mode m);
Mode mode_from_name(std::string_view name);

struct AnswerCode {
  std::array<int, 2> eta{};
  double reward = 0.0;
  Verdict verdict = Verdict::SyntaxError;
};

std::array<int, 2> eta_for(Verdict v);

/// Parses, evaluates and scores a question. `rng` is only drawn from in
/// Random mode, and only when the question parses.
AnswerCode answer(std::span<const TokenId> tokens, const grid::WorldState& s, Mode mode, Rng& rng);

/// Every grammatical sentence wrapped in <sos> ... <eos>.
std::vector<Tokens> enumerate_grammar();

/// Lowercase words joined by single spaces; markers are dropped.
std::string to_text(std::span<const TokenId> tokens);

/// Inverse of to_text; unknown words yield std::nullopt.
std::optional<Tokens> from_text(std::string_view text);

}  // namespace abya::oracle
