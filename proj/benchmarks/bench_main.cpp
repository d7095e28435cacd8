#include <benchmark/benchmark.h>

#include <random>

#include "abya/agent/agent.hpp"
#include "abya/autodiff/ops.hpp"
#include "abya/gridworld/world.hpp"
#include "abya/mi/mutual_information.hpp"
#include "abya/oracle/oracle.hpp"
#include "abya/training/trainer.hpp"

using namespace abya;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor<float> random_tensor(ad::Shape dims, std::mt19937_64& rng) {
  Tensor<float> t(dims);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& x : t.data()) x = u(rng);
  return t;
}

// Forward and backward through y = W x + b with a square W.
void BM_Linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto x = random_tensor({n}, rng), w = random_tensor({n, n}, rng), b = random_tensor({n}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    Var vw = tape.variable(w);
    Var y = ad::linear(tape, tape.constant(x), vw, tape.variable(b));
    tape.backward(ad::sum(tape, y));
    benchmark::DoNotOptimize(tape.grad(vw).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Linear)->Arg(64)->Arg(128)->Arg(256);

// 2x2 convolution over a 7x7 image, as in the observation encoder.
void BM_Conv2d(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const auto x = random_tensor({channels, 7, 7}, rng);
  const auto k = random_tensor({2 * channels, channels, 2, 2}, rng);
  const auto b = random_tensor({2 * channels}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    Var vk = tape.variable(k);
    Var y = ad::conv2d(tape, tape.constant(x), vk, tape.variable(b), 1, 0);
    tape.backward(ad::sum(tape, y));
    benchmark::DoNotOptimize(tape.grad(vk).data());
  }
}
BENCHMARK(BM_Conv2d)->Arg(3)->Arg(16)->Arg(32);

void BM_LstmCell(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const auto x = random_tensor({h}, rng), hid = random_tensor({h}, rng), cell = random_tensor({h}, rng);
  const auto w = random_tensor({4 * h, 2 * h}, rng), b = random_tensor({4 * h}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    Var vw = tape.variable(w);
    auto out = ad::lstm_cell(tape, tape.constant(x), tape.constant(hid), tape.constant(cell), vw, tape.variable(b));
    tape.backward(ad::sum(tape, out.hidden));
    benchmark::DoNotOptimize(tape.grad(vw).data());
  }
}
BENCHMARK(BM_LstmCell)->Arg(32)->Arg(128);

void BM_OracleAnswer(benchmark::State& state) {
  Rng rng(4);
  const auto world = grid::generate(grid::EnvConfig::from_name("MultiRoom-N4-S5"), rng);
  const auto q = oracle::from_text("green goal is north").value();
  for (auto _ : state) benchmark::DoNotOptimize(oracle::answer(q, world, oracle::Mode::Train, rng));
}
BENCHMARK(BM_OracleAnswer);

// One full episode with its update; steps per second is the useful figure.
void BM_TrainingEpisode(benchmark::State& state) {
  const auto kind = static_cast<agent::ModelKind>(state.range(0));
  const auto env = grid::EnvConfig::from_name("MultiRoom-N2-S4");
  training::Trainer<float> trainer(training::TrainConfig::defaults(kind), agent::make_params<float>(kind, 5));
  std::uint64_t episode = 0;
  std::int64_t steps = 0;
  for (auto _ : state) steps += static_cast<std::int64_t>(trainer.run_episode(env, episode++, true).length);
  state.SetLabel(std::string(agent::model_name(kind)));
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_TrainingEpisode)
    ->Arg(static_cast<int>(agent::ModelKind::Main))
    ->Arg(static_cast<int>(agent::ModelKind::Film))
    ->Arg(static_cast<int>(agent::ModelKind::Baseline))
    ->Unit(benchmark::kMillisecond);

// MI estimate at one step as a function of the number of sampled questions.
void BM_AgentMi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ps = agent::make_params<float>(agent::ModelKind::Main, 6);
  Rng world_rng(7);
  const auto world = grid::generate(grid::EnvConfig::from_name("MultiRoom-N2-S4"), world_rng);
  Rng rng(8);
  for (auto _ : state) {
    Tape<float> tape;
    ad::BoundParams<float> bound(tape, ps);
    agent::Forward<float> fwd(tape, bound, agent::ModelKind::Main);
    auto mem = fwd.init_episode(rng);
    const auto enc = fwd.encode_observation(grid::observe(world));
    auto est = mi::estimate_agent_mi(fwd, enc, mem.hidden, n, world, oracle::Mode::Train, rng);
    tape.backward(est.value);
    benchmark::DoNotOptimize(est.summary.value);
  }
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AgentMi)->RangeMultiplier(2)->Range(2, 32)->Complexity(benchmark::oN)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
