#include <gtest/gtest.h>

#include <cmath>

#include "abya/mi/mutual_information.hpp"
#include "abya/training/trainer.hpp"
#include "support/gradcheck.hpp"

using namespace abya;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

std::vector<double> one_hot(std::size_t k, std::size_t n = 7) {
  std::vector<double> p(n, 0.0);
  p[k] = 1.0;
  return p;
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n = 7) {
  std::gamma_distribution<double> g(0.3, 1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& x : p) total += (x = g(rng) + 1e-12);
  for (auto& x : p) x /= total;
  return p;
}

}  // namespace

TEST(MutualInformation, TwoEquiprobableQuestionsGiveLn2) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.5);
  const auto est = mi::estimate_mi(
      10000, [&] { return static_cast<std::size_t>(coin(rng)); }, [](std::size_t q) { return one_hot(q); });
  EXPECT_EQ(est.samples, 10000u);
  EXPECT_NEAR(est.value, std::log(2.0), 0.01);
}

TEST(MutualInformation, IdenticalConditionalsGiveZero) {
  std::mt19937_64 rng(2);
  const auto p = random_distribution(rng);
  const auto est = mi::mutual_information(std::vector<std::vector<double>>(50, p));
  EXPECT_NEAR(est.value, 0.0, 1e-9);
  for (std::size_t a = 0; a < p.size(); ++a) EXPECT_NEAR(est.marginal[a], p[a], 1e-15);
}

TEST(MutualInformation, StaysWithinEntropyBounds) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> n(2, 30);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::vector<double>> conds(n(rng));
    for (auto& c : conds) c = trial % 3 == 0 ? one_hot(rng() % 7) : random_distribution(rng);
    const auto est = mi::mutual_information(conds);
    EXPECT_GE(est.value, -1e-9);
    EXPECT_LE(est.value, std::log(7.0) + 1e-9);
    double total = 0;
    for (double m : est.marginal) total += m;
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  // Seven deterministic, equally frequent actions reach the bound.
  std::vector<std::vector<double>> all;
  for (std::size_t k = 0; k < 7; ++k) all.push_back(one_hot(k));
  EXPECT_NEAR(mi::mutual_information(all).value, std::log(7.0), 1e-12);
}

TEST(MutualInformation, RejectsTooFewSamples) {
  EXPECT_THROW(mi::mutual_information(std::vector<std::vector<double>>{one_hot(0)}), std::invalid_argument);
  EXPECT_THROW(mi::estimate_mi(1, [] { return 0; }, [](int) { return one_hot(0); }), std::invalid_argument);
}

TEST(MutualInformation, TapeFormMatchesValueAndGradients) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor<double>> logits;
    for (int n = 0; n < 4; ++n) logits.push_back(test::random_tensor({7}, rng, -2, 2));
    auto f = [](Tape<double>& t, const std::vector<Var>& v) {
      std::vector<Var> probs;
      for (Var x : v) probs.push_back(ad::softmax(t, x));
      return mi::mutual_information(t, probs);
    };
    Tape<double> tape;
    std::vector<Var> vars;
    std::vector<std::vector<double>> plain;
    for (const auto& l : logits) {
      vars.push_back(tape.constant(l));
      const auto p = tape.value(ad::softmax(tape, vars.back()));
      plain.emplace_back(p.data().begin(), p.data().end());
    }
    EXPECT_NEAR(tape.value(f(tape, vars))[0], mi::mutual_information(plain).value, 1e-12);
    EXPECT_LT(test::check_gradients(f, logits).max_error, test::kTolerance);
  }
}

TEST(MutualInformation, AugmentedLoss) {
  Tape<double> tape;
  Var loss = tape.constant(Tensor<double>::scalar(1.25));
  Var mi_value = tape.constant(Tensor<double>::scalar(0.5));
  EXPECT_TRUE(mi::mi_augmented_loss(tape, loss, mi_value, 0.0) == loss);
  EXPECT_DOUBLE_EQ(tape.value(mi::mi_augmented_loss(tape, loss, mi_value, 1.0))[0], 1.75);
}

TEST(MutualInformation, AgentEstimateIsBounded) {
  const auto ps = agent::make_params<double>(agent::ModelKind::Main, 2);
  Rng world_rng(5);
  const auto world = grid::generate(grid::EnvConfig::from_name("MultiRoom-N2-S4"), world_rng);
  Tape<double> tape;
  ad::BoundParams<double> bound(tape, ps);
  agent::Forward<double> fwd(tape, bound, agent::ModelKind::Main);
  Rng rng(6);
  auto state = fwd.init_episode(rng);
  const auto enc = fwd.encode_observation(grid::observe(world));
  const auto est = mi::estimate_agent_mi(fwd, enc, state.hidden, 8, world, oracle::Mode::Train, rng);
  EXPECT_EQ(est.summary.samples, 8u);
  EXPECT_NEAR(tape.value(est.value)[0], est.summary.value, 1e-9);
  EXPECT_GE(est.summary.value, -1e-9);
  EXPECT_LE(est.summary.value, std::log(7.0));
  EXPECT_THROW(mi::estimate_agent_mi(fwd, enc, state.hidden, 1, world, oracle::Mode::Train, rng),
               std::invalid_argument);
}

TEST(MutualInformation, TrainerReportsTheEstimateWhenEnabled) {
  auto cfg = training::TrainConfig::defaults(agent::ModelKind::Main);
  cfg.mi_enabled = true;
  cfg.mi_samples = 3;
  cfg.mi_weight = 0.1;
  training::Trainer<float> trainer(cfg, agent::make_params<float>(agent::ModelKind::Main, 1));
  const auto m = trainer.run_episode(grid::EnvConfig::from_name("MultiRoom-N2-S4"), 0, true);
  EXPECT_TRUE(m.update.applied);
  EXPECT_GT(m.update.mutual_information, 0.0);
  EXPECT_LE(m.update.mutual_information, std::log(7.0));
}
