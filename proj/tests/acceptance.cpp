// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--runs DIR]
//
// Criteria 7 and 8 read the long runs written by tools/run_experiments.sh.
// Exit status is the number of failed criteria.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "abya/gridworld/world.hpp"
#include "abya/harness/harness.hpp"
#include "abya/io/checkpoint.hpp"
#include "abya/mi/mutual_information.hpp"
#include "abya/oracle/oracle.hpp"
#include "abya/training/advantage.hpp"
#include "abya/training/pretrain.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace abya;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr std::size_t kMutations = 10000;
constexpr double kGrammarSeconds = 1.0;
constexpr std::size_t kOraclePairs = 10000;
constexpr double kOracleSeconds = 10.0;
constexpr double kGradientTolerance = 1e-4;
constexpr std::size_t kGradientCases = 100;
constexpr double kGradientSeconds = 60.0;
constexpr std::size_t kGaeTrajectories = 1000;
constexpr double kGaeTolerance = 1e-9;
constexpr double kWorkedExampleTolerance = 1e-12;
constexpr double kRewardTolerance = 1e-12;
constexpr std::size_t kLmSamples = 1000;
constexpr double kLmValidFraction = 0.99;
constexpr double kTrainTarget = 0.65;
constexpr std::size_t kTrainBudget = 30000;
constexpr double kBaselineGap = 0.2;
constexpr double kRandomOracleGap = 0.05;
constexpr std::size_t kMiSamples = 10000;
constexpr double kMiTolerance = 0.01;
constexpr double kIdenticalTolerance = 1e-9;
const std::vector<std::uint64_t> kRunSeeds = {0, 1, 2};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed(double x, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << x;
  return out.str();
}

oracle::Tokens body(std::string_view text) { return oracle::from_text(text).value(); }

bool parses(const oracle::Tokens& t) { return std::holds_alternative<oracle::Predicate>(oracle::parse(t)); }

Outcome grammar() {
  Stopwatch clock;
  const auto reference = test::grammar_sentences();
  std::size_t parsed = 0, matched = 0;
  const auto sentences = oracle::enumerate_grammar();
  for (const auto& s : sentences) {
    const oracle::Tokens inner(s.begin() + 1, s.end() - 1);
    parsed += parses(inner);
    matched += reference.contains(test::words_of(inner));
  }

  // Token-level edits of grammatical sentences that leave the grammar.
  std::mt19937_64 rng(1);
  const std::vector<std::vector<std::string>> pool(reference.begin(), reference.end());
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> token_id(0, static_cast<int>(oracle::vocab::kSize) - 1);
  auto any_token = [&](std::mt19937_64& g) { return static_cast<oracle::TokenId>(token_id(g)); };
  std::size_t mutations = 0, rejected = 0;
  while (mutations < kMutations) {
    oracle::Tokens t = body([&] {
      std::string text;
      for (const auto& w : pool[pick(rng)]) text += (text.empty() ? "" : " ") + w;
      return text;
    }());
    const int edits = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int e = 0; e < edits; ++e) {
      const std::size_t at = t.empty() ? 0 : std::uniform_int_distribution<std::size_t>(0, t.size() - 1)(rng);
      switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
        case 0:
          if (!t.empty()) t[at] = any_token(rng);
          break;
        case 1:
          t.insert(t.begin() + static_cast<std::ptrdiff_t>(at), any_token(rng));
          break;
        case 2:
          if (!t.empty()) t.erase(t.begin() + static_cast<std::ptrdiff_t>(at));
          break;
        default:
          if (t.size() > 1) std::swap(t[at], t[(at + 1) % t.size()]);
      }
    }
    if (reference.contains(test::words_of(t))) continue;
    ++mutations;
    rejected += !parses(t);
  }

  // Answer code table, Train mode.
  auto s = test::random_world(rng);
  s.cells.assign(s.cells.size(), grid::Cell{});
  s.at({0, 0}) = grid::Cell{grid::ObjectKind::Door, grid::Color::Red, grid::DoorState::Closed};
  s.agent = {1, 1};
  struct Row {
    const char* text;
    std::array<int, 2> eta;
    double reward;
  };
  bool table = true;
  Rng unused(0);
  for (const Row& row : {Row{"red door is closed", {1, 1}, 0.2}, Row{"red door is open", {0, 0}, 0.2},
                         Row{"blue door is open", {0, 1}, 0.0}, Row{"door red closed is", {1, 0}, -0.2}}) {
    const auto a = oracle::answer(body(row.text), s, oracle::Mode::Train, unused);
    table = table && a.eta == row.eta && a.reward == row.reward;
  }
  const double secs = clock.seconds();
  Outcome out;
  out.pass = sentences.size() == 108 && parsed == 108 && matched == 108 && rejected == mutations && table &&
             secs < kGrammarSeconds;
  out.detail = std::to_string(parsed) + "/" + std::to_string(sentences.size()) + " sentences parse, " +
               std::to_string(rejected) + "/" + std::to_string(mutations) + " mutations rejected, answer table " +
               (table ? "exact" : "wrong") + ", " + fixed(secs, 3) + " s (limit " + fixed(kGrammarSeconds, 0) + ")";
  return out;
}

/// Chebyshev distance from the agent to the object a sentence names (assumed unique).
int distance_to_object(const std::vector<std::string>& words, const grid::WorldState& s) {
  const grid::ObjectKind kind = words[1] == "door"   ? grid::ObjectKind::Door
                                : words[1] == "goal" ? grid::ObjectKind::Goal
                                                     : grid::ObjectKind::Wall;
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c) {
      const auto& cell = s.at({r, c});
      if (cell.kind == kind && test::color_words()[static_cast<std::size_t>(cell.color)] == words[0])
        return std::max(std::abs(r - s.agent.row), std::abs(c - s.agent.col));
    }
  return -1;
}

Outcome oracle_truth() {
  Stopwatch clock;
  std::mt19937_64 rng(2);
  const auto sentences = oracle::enumerate_grammar();
  std::uniform_int_distribution<std::size_t> pick(0, sentences.size() - 1);
  std::size_t agree = 0, off_view = 0;
  Rng unused(0);
  for (std::size_t i = 0; i < kOraclePairs; ++i) {
    const auto s = test::random_world(rng);
    const auto& q = sentences[pick(rng)];
    const oracle::Tokens inner(q.begin() + 1, q.end() - 1);
    const auto words = test::words_of(inner);
    const auto got = oracle::answer(inner, s, oracle::Mode::Train, unused).verdict;
    const auto want = test::brute_force_verdict(words, s);
    agree += oracle::verdict_name(got) == want;
    // The egocentric view reaches at most 6 cells from the agent.
    if (want == "True" || want == "False") off_view += distance_to_object(words, s) > 6;
  }
  const double secs = clock.seconds();
  Outcome out;
  out.pass = agree == kOraclePairs && off_view > 0 && secs < kOracleSeconds;
  out.detail = std::to_string(agree) + "/" + std::to_string(kOraclePairs) + " agree with brute force, " +
               std::to_string(off_view) + " answered about objects out of view, " + fixed(secs, 2) + " s (limit " +
               fixed(kOracleSeconds, 0) + ")";
  return out;
}

Outcome gradients() {
  Stopwatch clock;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  const auto cases = test::primitive_cases();
  for (const auto& c : cases) {
    for (std::size_t i = 0; i < kGradientCases; ++i) {
      const double err = c.run(rng).max_error;
      if (err > worst) {
        worst = err;
        worst_name = c.name;
      }
      ++checked;
    }
  }
  const double secs = clock.seconds();
  Outcome out;
  out.pass = worst < kGradientTolerance && secs < kGradientSeconds;
  std::ostringstream d;
  d << cases.size() << " primitives and losses x " << kGradientCases << " cases, worst relative error "
    << std::scientific << std::setprecision(2) << worst << " (" << worst_name << ", limit " << kGradientTolerance
    << "), " << fixed(secs, 1) << " s (limit " << fixed(kGradientSeconds, 0) << ")";
  out.detail = d.str();
  return out;
}

Outcome gae() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> length(1, 120);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < kGaeTrajectories; ++i) {
    const std::size_t n = length(rng);
    std::vector<double> r(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = unit(rng);
      v[t] = unit(rng);
    }
    const auto got = training::compute_gae(r, v, 0.99, 0.95).advantages;
    const auto want = test::brute_force_gae(r, v, 0.99, 0.95);
    for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(got[t] - want[t]));
  }
  const double a0 = training::compute_gae(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.4}, 0.99, 0.95)
                        .advantages[0];
  Outcome out;
  out.pass = worst < kGaeTolerance && std::abs(a0 - 0.4603) < kWorkedExampleTolerance;
  std::ostringstream d;
  d << kGaeTrajectories << " trajectories, worst deviation " << std::scientific << std::setprecision(2) << worst
    << " (limit " << kGaeTolerance << "), worked example A0 = " << std::fixed << std::setprecision(6) << a0;
  out.detail = d.str();
  return out;
}

grid::WorldState room(grid::Position agent, grid::Heading h, int max_steps) {
  grid::WorldState s;
  s.width = s.height = 6;  // interior side 4
  s.cells.assign(36, grid::Cell{});
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      if (r == 0 || c == 0 || r == 5 || c == 5) s.at({r, c}) = grid::Cell{grid::ObjectKind::Wall};
  s.agent = agent;
  s.heading = h;
  s.max_steps = max_steps;
  return s;
}

Outcome reward() {
  const int max_steps = grid::EnvConfig::from_name("MultiRoom-N2-S4").max_steps();
  auto s = room({2, 1}, grid::Heading::East, max_steps);
  s.at({2, 2}) = grid::Cell{grid::ObjectKind::Goal, grid::Color::Green};
  s.steps = 39;
  const auto goal = grid::step(s, grid::Action::Forward);

  grid::StepResult out{room({2, 2}, grid::Heading::North, max_steps)};
  double total = 0.0;
  while (!out.terminated) {
    out = grid::step(out.state, grid::Action::TurnLeft);
    total += out.reward;
  }
  Outcome o;
  o.pass = goal.terminated && goal.state.steps == 40 && std::abs(goal.reward - 0.55) < kRewardTolerance &&
           out.state.steps == max_steps && out.reward == 0.0 && total == 0.0;
  o.detail = "goal at T=40 of " + std::to_string(max_steps) + " pays " + fixed(goal.reward, 12) +
             ", truncation after " + std::to_string(out.state.steps) + " steps pays " + fixed(out.reward, 1);
  return o;
}

Outcome language_model() {
  Stopwatch clock;
  const auto lm = harness::pretrain_language_model(0);
  auto params = agent::make_params<float>(agent::ModelKind::Main, 0);
  io::restore_language_model(lm.checkpoint, params);
  Rng rng(1);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < kLmSamples; ++i) valid += parses(training::sample_question(params, rng));
  const double fraction = static_cast<double>(valid) / kLmSamples;
  Outcome out;
  out.pass = fraction >= kLmValidFraction;
  out.detail = std::to_string(valid) + "/" + std::to_string(kLmSamples) + " sampled questions grammatical (need " +
               fixed(kLmValidFraction, 2) + "), " + std::to_string(lm.report.epochs) + " epochs, final loss " +
               fixed(lm.report.epoch_loss.back()) + " nats/token, " + fixed(clock.seconds(), 1) + " s";
  return out;
}

/// The ma100 column of a metrics file, empty if the file is missing.
std::vector<double> moving_average(const fs::path& metrics) {
  std::ifstream in(metrics);
  std::vector<double> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string field;
    for (int k = 0; k < 4; ++k) std::getline(row, field, ',');
    out.push_back(std::stod(field));
  }
  return out;
}

std::string missing(const fs::path& runs) {
  return "no runs under " + runs.string() + " (produce them with tools/run_experiments.sh)";
}

Outcome training_target(const fs::path& runs) {
  std::size_t reached = 0, present = 0;
  std::string per_seed;
  for (auto seed : kRunSeeds) {
    const auto ma = moving_average(runs / "main" / ("seed-" + std::to_string(seed)) / "metrics.csv");
    if (ma.empty()) continue;
    ++present;
    const std::size_t n = std::min(ma.size(), kTrainBudget);
    const auto best = std::max_element(ma.begin(), ma.begin() + static_cast<std::ptrdiff_t>(n));
    reached += *best >= kTrainTarget;
    per_seed += (per_seed.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " best " +
                fixed(*best, 3) + " at episode " + std::to_string(best - ma.begin()) + "/" + std::to_string(n) +
                " (final " + fixed(ma[n - 1], 3) + ")";
  }
  Outcome out;
  if (present == 0) {
    out.detail = missing(runs);
    return out;
  }
  out.pass = present == kRunSeeds.size() && 2 * reached > kRunSeeds.size();
  out.detail = std::to_string(reached) + "/" + std::to_string(kRunSeeds.size()) + " seeds reach ma100 >= " +
               fixed(kTrainTarget, 2) + ": " + per_seed;
  return out;
}

Outcome transfer_orderings(const fs::path& runs) {
  std::size_t beats_baseline = 0, beats_random = 0, present = 0;
  std::string per_seed;
  for (auto seed : kRunSeeds) {
    const std::string dir = "seed-" + std::to_string(seed);
    const auto main = moving_average(runs / "main-test" / dir / "metrics.csv");
    const auto random = moving_average(runs / "main-random" / dir / "metrics.csv");
    const auto baseline = moving_average(runs / "baseline-test" / dir / "metrics.csv");
    if (main.empty() || random.empty() || baseline.empty()) continue;
    ++present;
    beats_baseline += main.back() - baseline.back() >= kBaselineGap;
    beats_random += main.back() - random.back() >= kRandomOracleGap;
    per_seed += (per_seed.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " main " +
                fixed(main.back(), 3) + ", baseline " + fixed(baseline.back(), 3) + ", random oracle " +
                fixed(random.back(), 3);
  }
  Outcome out;
  if (present == 0) {
    out.detail = missing(runs);
    return out;
  }
  const std::size_t n = kRunSeeds.size();
  out.pass = present == n && 2 * beats_baseline > n && 2 * beats_random > n;
  out.detail = "main beats baseline by >= " + fixed(kBaselineGap, 2) + " on " + std::to_string(beats_baseline) + "/" +
               std::to_string(n) + ", random oracle by >= " + fixed(kRandomOracleGap, 2) + " on " +
               std::to_string(beats_random) + "/" + std::to_string(n) + ": " + per_seed;
  return out;
}

std::vector<double> one_hot(std::size_t k) {
  std::vector<double> p(7, 0.0);
  p[k] = 1.0;
  return p;
}

Outcome mutual_information() {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.5);
  const auto two = mi::estimate_mi(
      kMiSamples, [&] { return static_cast<std::size_t>(coin(rng)); }, [](std::size_t q) { return one_hot(q); });
  const std::vector<double> p = {0.1, 0.2, 0.05, 0.3, 0.15, 0.1, 0.1};
  const auto same = mi::mutual_information(std::vector<std::vector<double>>(kMiSamples, p));
  Outcome out;
  out.pass = std::abs(two.value - std::log(2.0)) < kMiTolerance && std::abs(same.value) < kIdenticalTolerance;
  std::ostringstream d;
  d << "two questions " << std::fixed << std::setprecision(5) << two.value << " vs ln 2 = " << std::log(2.0)
    << " (tolerance " << kMiTolerance << "), identical conditionals " << std::scientific << std::setprecision(2)
    << same.value << " (tolerance " << kIdenticalTolerance << ")";
  out.detail = d.str();
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome persistence() {
  const fs::path root = fs::temp_directory_path() / "abya_acceptance";
  fs::remove_all(root);
  io::Checkpoint lm;
  lm.params = agent::make_params<float>(agent::ModelKind::Main, 11);
  auto cfg = training::TrainConfig::defaults(agent::ModelKind::Main);
  cfg.episodes = 6;
  cfg.seed = 3;
  cfg.transcript_every = 2;

  std::vector<std::string> identical;
  bool all_same = true;
  for (int run = 0; run < 2; ++run) {
    cfg.out_dir = (root / ("run" + std::to_string(run))).string();
    harness::run_training(cfg, &lm);
  }
  for (const char* file : {"metrics.csv", "transcripts.jsonl", "final.ckpt"}) {
    const auto a = slurp(root / "run0" / file);
    const bool same = !a.empty() && a == slurp(root / "run1" / file);
    all_same = all_same && same;
    if (same) identical.emplace_back(file);
  }
  const auto loaded = io::load_checkpoint(root / "run0" / "final.ckpt");
  io::save_checkpoint(root / "again.ckpt", loaded);
  const bool round_trip = slurp(root / "again.ckpt") == slurp(root / "run0" / "final.ckpt");
  fs::remove_all(root);

  Outcome out;
  out.pass = all_same && round_trip;
  std::string files;
  for (const auto& f : identical) files += (files.empty() ? "" : ", ") + f;
  out.detail = std::string("checkpoint round trip ") + (round_trip ? "bit-identical" : "differs") +
               ", identical across fixed-seed runs: " + (files.empty() ? "none" : files);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string runs = ABYA_DEFAULT_RUNS_DIR;
  app.add_option("--criterion", only, "run only these criteria")->check(CLI::Range(1, 10));
  app.add_option("--runs", runs, "directory written by tools/run_experiments.sh");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"grammar and answer codes", grammar},
      {"oracle truth", oracle_truth},
      {"gradient checks", gradients},
      {"GAE", gae},
      {"reward formula", reward},
      {"LM pretraining", language_model},
      {"training on MultiRoom-N2-S4", [&] { return training_target(runs); }},
      {"transfer orderings on MultiRoom-N4-S5", [&] { return transfer_orderings(runs); }},
      {"MI estimator", mutual_information},
      {"persistence", persistence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << std::setw(2) << id << ' ' << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failures;
}
